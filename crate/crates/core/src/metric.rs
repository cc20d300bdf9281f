//! Fiber metric, Levi-Civita A-connection and its curvature.
//!
//! Christoffel symbols are defined by `D_{a_i} a_j = sum_k Gamma_ij^k a_k` and
//! come from the Koszul formula written in structure functions. The same
//! generic kernel runs on `f64` (values) and on first-order jets, which gives
//! the exact derivatives of Gamma needed by the curvature.

use crate::algebroid::{apply_anchor, AlgebroidChart, SectionField};
use crate::error::{Error, Result};
use crate::numeric::{invert, sample_box};
use crate::scalar_field::{Jet, Scalar, ScalarField};
use nalgebra::{DMatrix, SymmetricEigen};
use std::fmt::Write as _;

/// Smallest admissible eigenvalue of the metric matrix.
pub const MIN_EIGENVALUE: f64 = 1e-10;
/// Pairs with a smaller Gram determinant are rejected by sectional curvature.
pub const GRAM_TOL: f64 = 1e-12;
const LOAD_SAMPLES: usize = 64;

#[derive(Debug, Clone)]
pub struct MetricField {
    r: usize,
    n: usize,
    g: Vec<ScalarField>,
}

impl MetricField {
    /// Upper-triangle entries `(i, j, g_ij)` with `i <= j`, 0-based. Missing
    /// entries are zero.
    pub fn new(r: usize, n: usize, entries: Vec<(usize, usize, ScalarField)>) -> Result<Self> {
        let mut g = vec![ScalarField::zero(n); r * r];
        let mut seen = vec![false; r * r];
        for (i, j, f) in entries {
            if i >= r || j >= r {
                return Err(Error::Structure(format!("metric index ({}, {}) out of range", i + 1, j + 1)));
            }
            if i > j {
                return Err(Error::Structure(format!(
                    "metric entries need i <= j, got ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
            if f.arity() != n {
                return Err(Error::Dimension(format!("metric entry `{f}` has wrong arity")));
            }
            if seen[i * r + j] {
                return Err(Error::Structure(format!("duplicate metric entry ({}, {})", i + 1, j + 1)));
            }
            seen[i * r + j] = true;
            g[j * r + i] = f.clone();
            g[i * r + j] = f;
        }
        Ok(MetricField { r, n, g })
    }

    pub fn identity(r: usize, n: usize) -> Self {
        let entries = (0..r).map(|i| (i, i, ScalarField::constant(1.0, n))).collect();
        Self::new(r, n, entries).expect("identity metric is well formed")
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn field(&self, i: usize, j: usize) -> &ScalarField {
        &self.g[i * self.r + j]
    }

    /// `g(x)` row-major, checked for positive definiteness.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self
            .g
            .iter()
            .map(|f| f.value(x).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        check_positive_definite(&g, self.r, x)?;
        Ok(g)
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.values(x)?;
        invert(&g, self.r).ok_or_else(|| singular(x, 0.0))
    }

    pub(crate) fn jets(&self, x: &[f64], order: u8) -> Result<Vec<Jet>> {
        let g = self
            .g
            .iter()
            .map(|f| f.jet(x, order).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = g.iter().map(Jet::value).collect();
        check_positive_definite(&values, self.r, x)?;
        Ok(g)
    }
}

pub(crate) fn singular(x: &[f64], min_eigenvalue: f64) -> Error {
    Error::SingularMetric {
        x: x.to_vec(),
        min_eigenvalue,
    }
}

pub fn smallest_eigenvalue(g: &[f64], r: usize) -> f64 {
    let m = DMatrix::from_row_slice(r, r, g);
    let sym = 0.5 * (&m + m.transpose());
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn check_positive_definite(g: &[f64], r: usize, x: &[f64]) -> Result<()> {
    let lam = smallest_eigenvalue(g, r);
    if !(lam > MIN_EIGENVALUE) {
        return Err(singular(x, lam));
    }
    Ok(())
}

/// `<u, v>` for a row-major metric matrix.
pub fn inner(g: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let r = u.len();
    let mut acc = 0.0;
    for i in 0..r {
        if u[i] == 0.0 {
            continue;
        }
        for j in 0..r {
            acc += u[i] * g[i * r + j] * v[j];
        }
    }
    acc
}

pub(crate) fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let r = v.len();
    (0..m.len() / r)
        .map(|i| (0..r).map(|j| m[i * r + j] * v[j]).sum())
        .collect()
}

/// Koszul-formula Christoffel kernel.
///
/// `b`: `r x n`, `c`: `(s*r+t)*r+u`, `g`, `ginv`: `r x r`,
/// `dg[(i*r+j)*n + u] = d g_ij / dx_u`. Returns `Gamma[(i*r+j)*r+k]`.
pub(crate) fn christoffel_kernel<S: Scalar>(
    n: usize,
    r: usize,
    b: &[S],
    c: &[S],
    g: &[S],
    dg: &[S],
    ginv: &[S],
) -> Vec<S> {
    // anchor derivative of g_jl along a_i
    let mut along = vec![S::zero(); r * r * r];
    for i in 0..r {
        for jl in 0..r * r {
            let mut acc = S::zero();
            for u in 0..n {
                let bi = &b[i * n + u];
                let d = &dg[jl * n + u];
                if bi.is_exact_zero() || d.is_exact_zero() {
                    continue;
                }
                acc = acc + bi.clone() * d.clone();
            }
            along[i * r * r + jl] = acc;
        }
    }
    let mut lower = vec![S::zero(); r * r * r];
    for i in 0..r {
        for j in 0..r {
            for l in 0..r {
                let mut acc = along[i * r * r + j * r + l].clone() + along[j * r * r + i * r + l].clone()
                    - along[l * r * r + i * r + j].clone();
                for u in 0..r {
                    for (cc, gg) in [
                        (&c[(i * r + j) * r + u], &g[u * r + l]),
                        (&c[(l * r + i) * r + u], &g[u * r + j]),
                        (&c[(l * r + j) * r + u], &g[u * r + i]),
                    ] {
                        if cc.is_exact_zero() || gg.is_exact_zero() {
                            continue;
                        }
                        acc = acc + cc.clone() * gg.clone();
                    }
                }
                lower[(i * r + j) * r + l] = acc;
            }
        }
    }
    let mut gamma = vec![S::zero(); r * r * r];
    for ij in 0..r * r {
        for k in 0..r {
            let mut acc = S::zero();
            for l in 0..r {
                let gi = &ginv[k * r + l];
                let lo = &lower[ij * r + l];
                if gi.is_exact_zero() || lo.is_exact_zero() {
                    continue;
                }
                acc = acc + gi.clone() * lo.clone();
            }
            gamma[ij * r + k] = acc * S::constant(0.5);
        }
    }
    gamma
}

/// Christoffel symbols at a point, optionally with their first derivatives.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub r: usize,
    pub n: usize,
    pub gamma: Vec<f64>,
    /// `dgamma[m * r^3 + (i*r+j)*r + k] = d Gamma_ij^k / dx_m`.
    pub dgamma: Option<Vec<f64>>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.r + j) * self.r + k]
    }

    pub fn d(&self, m: usize, i: usize, j: usize, k: usize) -> f64 {
        let r = self.r;
        self.dgamma.as_ref().expect("derivatives were not computed")[m * r * r * r + (i * r + j) * r + k]
    }

    /// `Gamma(u, v) = sum_ij u_i v_j Gamma_ij`, i.e. `D_u v` for constant extensions.
    pub fn contract(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; r];
        for i in 0..r {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..r {
                let w = u[i] * v[j];
                if w == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.gamma[(i * r + j) * r + k];
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let r = self.r;
        let mut out = String::from("i,j,k,value\n");
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    let _ = writeln!(out, "{},{},{},{:.16e}", i + 1, j + 1, k + 1, self.get(i, j, k));
                }
            }
        }
        out
    }
}

/// Components `R^l_{kij}` with `R(a_i, a_j) a_k = sum_l R^l_{kij} a_l`.
#[derive(Debug, Clone)]
pub struct Curvature {
    pub r: usize,
    data: Vec<f64>,
}

impl Curvature {
    pub fn get(&self, l: usize, k: usize, i: usize, j: usize) -> f64 {
        let r = self.r;
        self.data[((l * r + k) * r + i) * r + j]
    }

    /// `R(a, b) c`.
    pub fn apply(&self, a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; r];
        for i in 0..r {
            for j in 0..r {
                let w = a[i] * b[j];
                if w == 0.0 {
                    continue;
                }
                for k in 0..r {
                    let wk = w * c[k];
                    if wk == 0.0 {
                        continue;
                    }
                    for (l, o) in out.iter_mut().enumerate() {
                        *o += wk * self.get(l, k, i, j);
                    }
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let r = self.r;
        let mut out = String::from("l,k,i,j,value\n");
        for l in 0..r {
            for k in 0..r {
                for i in 0..r {
                    for j in 0..r {
                        let _ = writeln!(out, "{},{},{},{},{:.16e}", l + 1, k + 1, i + 1, j + 1, self.get(l, k, i, j));
                    }
                }
            }
        }
        out
    }
}

/// Everything pointwise that the flows and tensors need.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub x: Vec<f64>,
    pub n: usize,
    pub r: usize,
    /// Anchor matrix, `r x n`.
    pub b: Vec<f64>,
    /// Bracket coefficients, `(s*r+t)*r+u`.
    pub c: Vec<f64>,
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub christoffel: Christoffel,
}

impl PointGeometry {
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        inner(&self.g, u, v)
    }

    pub fn anchor(&self, mu: &[f64]) -> Vec<f64> {
        apply_anchor(&self.b, mu, self.n)
    }

    /// `[u, v]` of constant extensions at this point.
    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; r];
        for s in 0..r {
            for t in 0..r {
                let w = u[s] * v[t];
                if w == 0.0 {
                    continue;
                }
                for (k, o) in out.iter_mut().enumerate() {
                    *o += w * self.c[(s * r + t) * r + k];
                }
            }
        }
        out
    }

    pub fn gamma(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.christoffel.contract(u, v)
    }

    /// Curvature from the Christoffel symbols and their derivatives.
    pub fn curvature(&self) -> Curvature {
        let (n, r) = (self.n, self.r);
        let ch = &self.christoffel;
        let mut data = vec![0.0; r * r * r * r];
        for l in 0..r {
            for k in 0..r {
                for i in 0..r {
                    for j in 0..r {
                        let mut acc = 0.0;
                        for m in 0..n {
                            acc += self.b[i * n + m] * ch.d(m, j, k, l) - self.b[j * n + m] * ch.d(m, i, k, l);
                        }
                        for m in 0..r {
                            acc += ch.get(j, k, m) * ch.get(i, m, l) - ch.get(i, k, m) * ch.get(j, m, l);
                            acc -= self.c[(i * r + j) * r + m] * ch.get(m, k, l);
                        }
                        data[((l * r + k) * r + i) * r + j] = acc;
                    }
                }
            }
        }
        Curvature { r, data }
    }
}

/// An algebroid chart together with a fiber metric.
#[derive(Debug, Clone)]
pub struct RiemannianAlgebroid {
    pub chart: AlgebroidChart,
    pub metric: MetricField,
}

impl RiemannianAlgebroid {
    /// Checks dimensions and positive definiteness at sampled points.
    pub fn new(chart: AlgebroidChart, metric: MetricField) -> Result<Self> {
        if metric.rank() != chart.r() || metric.arity() != chart.n() {
            return Err(Error::Dimension(format!(
                "metric is {}x{} over {} variables, chart has r = {}, n = {}",
                metric.rank(),
                metric.rank(),
                metric.arity(),
                chart.r(),
                chart.n()
            )));
        }
        for x in sample_box(chart.domain(), LOAD_SAMPLES, 0) {
            metric.values(&x)?;
        }
        Ok(RiemannianAlgebroid { chart, metric })
    }

    pub fn n(&self) -> usize {
        self.chart.n()
    }

    pub fn r(&self) -> usize {
        self.chart.r()
    }

    /// Pointwise data; `derivatives` also computes the derivatives of Gamma.
    pub fn point(&self, x: &[f64], derivatives: bool) -> Result<PointGeometry> {
        let (n, r) = (self.n(), self.r());
        if x.len() != n {
            return Err(Error::Dimension(format!("point has {} coordinates, expected {n}", x.len())));
        }
        let b = self.chart.anchor_matrix(x)?;
        let c = self.chart.bracket_values(x)?;
        let christoffel = if derivatives {
            self.christoffel_with_derivatives(x)?
        } else {
            let gj = self.metric.jets(x, 1)?;
            let g: Vec<f64> = gj.iter().map(Jet::value).collect();
            let mut dg = vec![0.0; r * r * n];
            for (ij, j) in gj.iter().enumerate() {
                for u in 0..n {
                    dg[ij * n + u] = j.d(u);
                }
            }
            let ginv = invert(&g, r).ok_or_else(|| singular(x, 0.0))?;
            Christoffel {
                r,
                n,
                gamma: christoffel_kernel(n, r, &b, &c, &g, &dg, &ginv),
                dgamma: None,
            }
        };
        let g = self.metric.values(x)?;
        let ginv = invert(&g, r).ok_or_else(|| singular(x, 0.0))?;
        Ok(PointGeometry {
            x: x.to_vec(),
            n,
            r,
            b,
            c,
            g,
            ginv,
            christoffel,
        })
    }

    fn christoffel_with_derivatives(&self, x: &[f64]) -> Result<Christoffel> {
        let sj = self.chart.structure_jets(x, 1)?;
        let g2 = self.metric.jets(x, 2)?;
        christoffel_from_jets(self.n(), self.r(), &sj.b, &sj.c, &g2, x)
    }

    pub fn christoffel(&self, x: &[f64]) -> Result<Christoffel> {
        Ok(self.point(x, true)?.christoffel)
    }

    pub fn curvature(&self, x: &[f64]) -> Result<Curvature> {
        Ok(self.point(x, true)?.curvature())
    }

    /// `(D_f g)^u = sum f_s g_t Gamma_st^u + #(f)(g_u)` at `x`.
    pub fn covariant_derivative(&self, f: &SectionField, g: &SectionField, x: &[f64]) -> Result<Vec<f64>> {
        let (n, r) = (self.n(), self.r());
        if f.components.len() != r || g.components.len() != r {
            return Err(Error::Dimension(format!("sections need {r} components")));
        }
        let p = self.point(x, false)?;
        let fv = f.values(x)?;
        let gj = g.jets(x, 1)?;
        let gv: Vec<f64> = gj.iter().map(Jet::value).collect();
        let fx = p.anchor(&fv);
        let mut out = p.gamma(&fv, &gv);
        for (u, o) in out.iter_mut().enumerate() {
            *o += (0..n).map(|i| fx[i] * gj[u].d(i)).sum::<f64>();
        }
        Ok(out)
    }

    /// `K(a, b) = -<R(a,b)a, b> / (<a,a><b,b> - <a,b>^2)`.
    pub fn sectional_curvature(&self, x: &[f64], a: &[f64], b: &[f64]) -> Result<f64> {
        self.chart.check_fiber(a)?;
        self.chart.check_fiber(b)?;
        let p = self.point(x, true)?;
        sectional_from(&p, &p.curvature(), a, b)
    }
}

/// Christoffel symbols and their derivatives from first-order jets of the
/// structure functions and second-order jets of the metric.
pub(crate) fn christoffel_from_jets(
    n: usize,
    r: usize,
    b: &[Jet],
    c: &[Jet],
    g2: &[Jet],
    x: &[f64],
) -> Result<Christoffel> {
    let g1: Vec<Jet> = g2.iter().map(|j| j.clone().truncate(1)).collect();
    let mut dg = Vec::with_capacity(r * r * n);
    for j in g2 {
        for u in 0..n {
            if j.is_constant() {
                dg.push(Jet::constant(0.0));
            } else {
                let row: Vec<f64> = (0..n).map(|m| j.dd(u, m)).collect();
                dg.push(Jet::from_parts(j.d(u), row, None));
            }
        }
    }
    let ginv = invert(&g1, r).ok_or_else(|| singular(x, 0.0))?;
    let b: Vec<Jet> = b.iter().map(|j| j.clone().truncate(1)).collect();
    let c: Vec<Jet> = c.iter().map(|j| j.clone().truncate(1)).collect();
    let gamma_j = christoffel_kernel(n, r, &b, &c, &g1, &dg, &ginv);
    let gamma = gamma_j.iter().map(Jet::value).collect();
    let r3 = r * r * r;
    let mut dgamma = vec![0.0; n * r3];
    for (idx, j) in gamma_j.iter().enumerate() {
        for m in 0..n {
            dgamma[m * r3 + idx] = j.d(m);
        }
    }
    Ok(Christoffel {
        r,
        n,
        gamma,
        dgamma: Some(dgamma),
    })
}

pub(crate) fn sectional_from(p: &PointGeometry, curv: &Curvature, a: &[f64], b: &[f64]) -> Result<f64> {
    let gram = p.inner(a, a) * p.inner(b, b) - p.inner(a, b).powi(2);
    if !(gram > GRAM_TOL) {
        return Err(Error::DegeneratePair(gram));
    }
    Ok(-p.inner(&curv.apply(a, b, a), b) / gram)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use std::f64::consts::PI;

    fn geom(name: &str) -> RiemannianAlgebroid {
        catalog::get(name).unwrap().geometry()
    }

    #[test]
    fn so3_gamma_is_half_the_structure_constants() {
        let g = geom("so3_biinv");
        let ch = g.christoffel(&[0.2]).unwrap();
        let c = g.chart.bracket_values(&[0.2]).unwrap();
        for (k, v) in ch.gamma.iter().enumerate() {
            assert!((v - 0.5 * c[k]).abs() < 1e-14);
        }
        assert_eq!(ch.get(0, 1, 2), 0.5);
    }

    #[test]
    fn euclidean_is_flat() {
        let g = geom("euclidean2");
        let p = g.point(&[0.5, -1.0], true).unwrap();
        assert!(p.christoffel.gamma.iter().all(|v| *v == 0.0));
        let curv = p.curvature();
        assert!(curv.data.iter().all(|v| *v == 0.0));
        assert_eq!(g.sectional_curvature(&[0.5, -1.0], &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn aff2_christoffel_table() {
        // Koszul by hand with [e1,e2] = e2, g = I
        let g = geom("aff2");
        let ch = g.christoffel(&[0.0]).unwrap();
        let expect = |i, j, k| match (i, j, k) {
            (1, 0, 1) => -1.0,
            (1, 1, 0) => 1.0,
            _ => 0.0,
        };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(ch.get(i, j, k), expect(i, j, k), "{i}{j}{k}");
                }
            }
        }
    }

    #[test]
    fn sphere_matches_gauss_curvature_oracle() {
        // Brioschi for ds^2 = E dx^2 + G dy^2 with E = 1, G = sin^2 x:
        // K = -(sqrt G)'' / sqrt G = 1
        let g = geom("sphere_chart");
        let x = [PI / 3.0, 1.0];
        let curv = g.curvature(&x).unwrap();
        let sg = (PI / 3.0).sin();
        let sqrt_g_dd = -sg;
        let k_oracle = -sqrt_g_dd / sg;
        // classical R_{1212} = K (EG - F^2), and R(e1,e2)e1 = -K G e2 here
        let r = curv.apply(&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]);
        assert!((r[1] + k_oracle).abs() < 1e-12, "{r:?}");
        assert!(r[0].abs() < 1e-12);
        let k = g.sectional_curvature(&x, &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_curvature_values() {
        let g = geom("heisenberg_central");
        let x = [0.3, -0.2];
        let curv = g.curvature(&x).unwrap();
        let e = |i: usize| {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            v
        };
        let p = g.point(&x, false).unwrap();
        assert!((p.inner(&curv.apply(&e(0), &e(1), &e(0)), &e(1)) - 0.75).abs() < 1e-14);
        assert!((g.sectional_curvature(&x, &e(0), &e(1)).unwrap() + 0.75).abs() < 1e-14);
        assert!((g.sectional_curvature(&x, &e(0), &e(2)).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn degenerate_pair_is_rejected() {
        let g = geom("euclidean2");
        assert!(matches!(
            g.sectional_curvature(&[0.0, 0.0], &[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::DegeneratePair(_))
        ));
    }

    #[test]
    fn covariant_derivative_of_basis_is_gamma_column() {
        let g = geom("heisenberg_central");
        let a1 = SectionField::basis(0, 3, 2);
        let a2 = SectionField::basis(1, 3, 2);
        let d = g.covariant_derivative(&a1, &a2, &[0.0, 0.0]).unwrap();
        assert_eq!(d, vec![0.0, 0.0, 0.5]);
    }

    #[test]
    fn metric_loader_checks() {
        let one = || ScalarField::constant(1.0, 1);
        assert!(MetricField::new(2, 1, vec![(1, 0, one())]).is_err());
        assert!(MetricField::new(2, 1, vec![(0, 2, one())]).is_err());
        let m = MetricField::new(2, 1, vec![(0, 0, one()), (0, 1, one()), (1, 1, one())]).unwrap();
        assert!(matches!(m.values(&[0.0]), Err(Error::SingularMetric { .. })));
    }

    #[test]
    fn csv_shapes() {
        let g = geom("aff2");
        let p = g.point(&[0.0], true).unwrap();
        assert_eq!(p.christoffel.to_csv().lines().count(), 1 + 8);
        assert_eq!(p.curvature().to_csv().lines().count(), 1 + 16);
    }
}
