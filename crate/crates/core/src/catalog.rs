//! Built-in algebroids with closed-form behavior.

use crate::algebroid::{AlgebroidChart, BracketEntry};
use crate::error::{Error, Result};
use crate::metric::{MetricField, RiemannianAlgebroid};
use crate::scalar_field::ScalarField;
use std::f64::consts::PI;

pub const NAMES: [&str; 6] = [
    "euclidean2",
    "sphere_chart",
    "so3_biinv",
    "aff2",
    "heisenberg_central",
    "foliation_xy",
];

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub chart: AlgebroidChart,
    pub metric: MetricField,
}

impl CatalogEntry {
    pub fn geometry(&self) -> RiemannianAlgebroid {
        RiemannianAlgebroid::new(self.chart.clone(), self.metric.clone()).expect("catalog entries are well formed")
    }
}

fn f(text: &str, n: usize) -> ScalarField {
    ScalarField::parse(text, n).expect("catalog expression")
}

fn rows(table: &[&[&str]], n: usize) -> Vec<Vec<ScalarField>> {
    table.iter().map(|row| row.iter().map(|e| f(e, n)).collect()).collect()
}

fn zero_anchor(r: usize) -> Vec<Vec<ScalarField>> {
    vec![vec![ScalarField::zero(1)]; r]
}

pub fn get(name: &str) -> Result<CatalogEntry> {
    let entry = match name {
        "euclidean2" => CatalogEntry {
            name: "euclidean2",
            description: "Tangent bundle of the plane with the flat metric. Gamma and curvature vanish, geodesics are straight lines.",
            chart: AlgebroidChart::new(2, 2, vec![(-10.0, 10.0); 2], rows(&[&["1", "0"], &["0", "1"]], 2), vec![])?,
            metric: MetricField::identity(2, 2),
        },
        "sphere_chart" => CatalogEntry {
            name: "sphere_chart",
            description: "Round unit sphere in polar coordinates (x1 = polar angle, x2 = azimuth), kept away from the poles and the seam. Sectional curvature 1, the equator is a geodesic.",
            chart: AlgebroidChart::new(
                2,
                2,
                vec![(0.1, PI - 0.1), (0.1, 2.0 * PI - 0.1)],
                rows(&[&["1", "0"], &["0", "1"]], 2),
                vec![],
            )?,
            metric: MetricField::new(2, 2, vec![(0, 0, f("1", 2)), (1, 1, f("sin(x1)^2", 2))])?,
        },
        "so3_biinv" => CatalogEntry {
            name: "so3_biinv",
            description: "so(3) over a point with the bi-invariant metric. Gamma = C/2, the geodesic field vanishes, unimodular.",
            chart: AlgebroidChart::new(
                1,
                3,
                vec![(-1.0, 1.0)],
                zero_anchor(3),
                vec![
                    BracketEntry::new(0, 1, 2, f("1", 1)),
                    BracketEntry::new(1, 2, 0, f("1", 1)),
                    // C_31^2 = 1 stored as C_13^2 = -1
                    BracketEntry::new(0, 2, 1, f("-1", 1)),
                ],
            )?,
            metric: MetricField::identity(3, 1),
        },
        "aff2" => CatalogEntry {
            name: "aff2",
            description: "Two-dimensional non-abelian Lie algebra [e1,e2] = e2 over a point. Not unimodular: the geodesic field has divergence mu1.",
            chart: AlgebroidChart::new(1, 2, vec![(-1.0, 1.0)], zero_anchor(2), vec![BracketEntry::new(0, 1, 1, f("1", 1))])?,
            metric: MetricField::identity(2, 1),
        },
        "heisenberg_central" => CatalogEntry {
            name: "heisenberg_central",
            description: "Transitive algebroid over the plane with [a1,a2] = a3 and a3 spanning the central kernel of the anchor. K(a1,a2) = -3/4, H_{a1}a2 = a3/2, T = 0.",
            chart: AlgebroidChart::new(
                2,
                3,
                vec![(-10.0, 10.0); 2],
                rows(&[&["1", "0"], &["0", "1"], &["0", "0"]], 2),
                vec![BracketEntry::new(0, 1, 2, f("1", 2))],
            )?,
            metric: MetricField::identity(3, 2),
        },
        "foliation_xy" => CatalogEntry {
            name: "foliation_xy",
            description: "The integrable subbundle span(d/dx, d/dy) of the tangent bundle of R^3. Injective anchor, leaves are horizontal planes.",
            chart: AlgebroidChart::new(
                3,
                2,
                vec![(-10.0, 10.0); 3],
                rows(&[&["1", "0", "0"], &["0", "1", "0"]], 3),
                vec![],
            )?,
            metric: MetricField::identity(2, 3),
        },
        other => return Err(Error::UnknownCatalog(other.to_string())),
    };
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_loads() {
        for name in NAMES {
            let e = get(name).unwrap();
            assert_eq!(e.name, name);
            let _ = e.geometry();
        }
    }

    #[test]
    fn unknown_name() {
        assert!(matches!(get("torus"), Err(Error::UnknownCatalog(_))));
    }

    #[test]
    fn so3_cyclic_constants() {
        let c = get("so3_biinv").unwrap().chart;
        assert_eq!(c.bracket_field(2, 0, 1).as_constant(), Some(1.0));
        assert_eq!(c.bracket_field(1, 2, 0).as_constant(), Some(1.0));
    }
}
