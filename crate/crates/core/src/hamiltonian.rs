//! The geodesic flow as a Hamiltonian system on the dual bundle.
//!
//! In coordinates `(x, xi)` on `A*` the linear Poisson structure is
//! `{x_i, x_j} = 0`, `{x_i, xi_s} = -b^{si}`, `{xi_s, xi_t} = sum_u C_st^u xi_u`.
//! The energy is `E = 1/2 sum g^{ij} xi_i xi_j` and its Hamiltonian field,
//! pushed to `A` by the metric, must agree with the geodesic system. Nothing
//! here touches the Christoffel code, which is the point.

use crate::algebroid::AVector;
use crate::error::{Error, Result};
use crate::metric::{mat_vec, RiemannianAlgebroid};
use crate::numeric::{invert, sample_box};
use crate::scalar_field::Jet;
use std::fmt::Write as _;

/// A point of `A*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl DualPoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        DualPoint { x, xi }
    }
}

/// The Poisson bivector in coordinates `(x_1..x_n, xi_1..xi_r)`.
#[derive(Debug, Clone)]
pub struct PoissonMatrix {
    pub dim: usize,
    pub data: Vec<f64>,
}

impl PoissonMatrix {
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.dim + b]
    }

    /// `{f, g}` for covectors `df`, `dg`.
    pub fn bracket(&self, df: &[f64], dg: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            for b in 0..self.dim {
                acc += df[a] * self.get(a, b) * dg[b];
            }
        }
        acc
    }
}

impl RiemannianAlgebroid {
    pub fn poisson_matrix(&self, p: &DualPoint) -> Result<PoissonMatrix> {
        let (n, r) = (self.n(), self.r());
        self.chart.check_fiber(&p.xi)?;
        let b = self.chart.anchor_matrix(&p.x)?;
        let c = self.chart.bracket_values(&p.x)?;
        let dim = n + r;
        let mut data = vec![0.0; dim * dim];
        for s in 0..r {
            for i in 0..n {
                data[i * dim + n + s] = -b[s * n + i];
                data[(n + s) * dim + i] = b[s * n + i];
            }
            for t in 0..r {
                data[(n + s) * dim + n + t] = (0..r).map(|u| c[(s * r + t) * r + u] * p.xi[u]).sum();
            }
        }
        Ok(PoissonMatrix { dim, data })
    }

    /// `mu = g^{-1} xi`.
    pub fn metric_iso(&self, p: &DualPoint) -> Result<AVector> {
        self.chart.check_fiber(&p.xi)?;
        let ginv = self.metric.inverse(&p.x)?;
        Ok(AVector::new(p.x.clone(), mat_vec(&ginv, &p.xi)))
    }

    /// `xi = g mu`.
    pub fn metric_iso_inv(&self, v: &AVector) -> Result<DualPoint> {
        self.chart.check_fiber(&v.mu)?;
        let g = self.metric.values(&v.x)?;
        Ok(DualPoint::new(v.x.clone(), mat_vec(&g, &v.mu)))
    }

    /// `E(x, xi)` and its differential in `(x, xi)` coordinates.
    pub fn dual_energy(&self, p: &DualPoint) -> Result<(f64, Vec<f64>)> {
        let (n, r) = (self.n(), self.r());
        let gj = self.metric.jets(&p.x, 1)?;
        let ginv = invert(&gj, r).ok_or_else(|| Error::SingularMetric {
            x: p.x.clone(),
            min_eigenvalue: 0.0,
        })?;
        let mut e = Jet::constant(0.0);
        for i in 0..r {
            for j in 0..r {
                e = e + ginv[i * r + j].clone() * Jet::constant(0.5 * p.xi[i] * p.xi[j]);
            }
        }
        let mut de = Vec::with_capacity(n + r);
        for i in 0..n {
            de.push(e.d(i));
        }
        for s in 0..r {
            de.push((0..r).map(|j| ginv[s * r + j].value() * p.xi[j]).sum());
        }
        Ok((e.value(), de))
    }

    /// `X_E = {E, .}` on the dual side.
    pub fn dual_hamiltonian_field(&self, p: &DualPoint) -> Result<Vec<f64>> {
        let pm = self.poisson_matrix(p)?;
        let (_, de) = self.dual_energy(p)?;
        Ok((0..pm.dim)
            .map(|c| (0..pm.dim).map(|a| de[a] * pm.get(a, c)).sum())
            .collect())
    }

    /// The Hamiltonian geodesic field in `(x, mu)` coordinates.
    pub fn hamiltonian_field(&self, v: &AVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let (n, r) = (self.n(), self.r());
        let p = self.metric_iso_inv(v)?;
        let z = self.dual_hamiltonian_field(&p)?;
        let (dx, dxi) = (z[..n].to_vec(), &z[n..]);
        // mu = g^{-1}(x) xi, so mu' = (d/dt g^{-1}) xi + g^{-1} xi'
        let gj = self.metric.jets(&v.x, 1)?;
        let ginv = invert(&gj, r).ok_or_else(|| Error::SingularMetric {
            x: v.x.clone(),
            min_eigenvalue: 0.0,
        })?;
        let mut dmu = vec![0.0; r];
        for (k, d) in dmu.iter_mut().enumerate() {
            for l in 0..r {
                let entry = &ginv[k * r + l];
                let rate: f64 = (0..n).map(|i| entry.d(i) * dx[i]).sum();
                *d += rate * p.xi[l] + entry.value() * dxi[l];
            }
        }
        Ok((dx, dmu))
    }

    /// `|X_E(x, 2 mu) - (2 dx, 4 dmu)|`, the homogeneity of the Liouville commutator.
    pub fn euler_identity_residual(&self, v: &AVector) -> Result<f64> {
        let (dx, dmu) = self.hamiltonian_field(v)?;
        let doubled = AVector::new(v.x.clone(), v.mu.iter().map(|m| 2.0 * m).collect());
        let (dx2, dmu2) = self.hamiltonian_field(&doubled)?;
        let a = dx.iter().zip(&dx2).map(|(p, q)| (2.0 * p - q).abs());
        let b = dmu.iter().zip(&dmu2).map(|(p, q)| (4.0 * p - q).abs());
        Ok(a.chain(b).fold(0.0, f64::max))
    }

    /// `{E, E}`, zero by antisymmetry.
    pub fn energy_self_bracket(&self, p: &DualPoint) -> Result<f64> {
        let pm = self.poisson_matrix(p)?;
        let (_, de) = self.dual_energy(p)?;
        Ok(pm.bracket(&de, &de))
    }

    /// Compares the Hamiltonian field with the geodesic system at sampled points.
    pub fn hamiltonian_check(&self, samples: usize, seed: u64, mu_scale: f64) -> Result<HamiltonianCheck> {
        let r = self.r();
        let mut domain = self.chart.domain().to_vec();
        domain.extend(std::iter::repeat_n((-mu_scale, mu_scale), r));
        let mut rows = Vec::with_capacity(samples);
        for z in sample_box(&domain, samples.max(1), seed) {
            let n = self.n();
            let v = AVector::new(z[..n].to_vec(), z[n..].to_vec());
            let (hx, hmu) = self.hamiltonian_field(&v)?;
            let (gx, gmu) = self.geodesic_field(&v)?;
            let diff = hx
                .iter()
                .zip(&gx)
                .chain(hmu.iter().zip(&gmu))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let euler = self.euler_identity_residual(&v)?;
            let p = self.metric_iso_inv(&v)?;
            let self_bracket = self.energy_self_bracket(&p)?.abs();
            rows.push(HamiltonianRow {
                point: v,
                difference: diff,
                euler,
                self_bracket,
            });
        }
        Ok(HamiltonianCheck { rows })
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianRow {
    pub point: AVector,
    /// Max component difference between the Hamiltonian and geodesic fields.
    pub difference: f64,
    pub euler: f64,
    pub self_bracket: f64,
}

#[derive(Debug, Clone)]
pub struct HamiltonianCheck {
    pub rows: Vec<HamiltonianRow>,
}

impl HamiltonianCheck {
    pub fn max_difference(&self) -> f64 {
        self.rows.iter().map(|r| r.difference).fold(0.0, f64::max)
    }

    pub fn max_euler(&self) -> f64 {
        self.rows.iter().map(|r| r.euler).fold(0.0, f64::max)
    }

    pub fn max_self_bracket(&self) -> f64 {
        self.rows.iter().map(|r| r.self_bracket).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let Some(first) = self.rows.first() else {
            return String::from("difference,euler,self_bracket\n");
        };
        let mut out = String::new();
        for i in 1..=first.point.x.len() {
            let _ = write!(out, "x{i},");
        }
        for u in 1..=first.point.mu.len() {
            let _ = write!(out, "mu{u},");
        }
        out.push_str("difference,euler,self_bracket\n");
        for row in &self.rows {
            for v in row.point.x.iter().chain(&row.point.mu) {
                let _ = write!(out, "{v:.16e},");
            }
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", row.difference, row.euler, row.self_bracket);
        }
        out
    }
}
