//! Two-parameter families of A-paths on a rectangular `(eps, t)` mesh.
//!
//! All derivatives on the mesh are second-order finite differences
//! (centered inside, three-point one-sided at the edges). For a variation
//! `alpha` with transverse variation `beta`,
//!
//! ```text
//! Delta(alpha, beta) = D_t beta - D_eps alpha
//! ```
//!
//! which lies in the kernel of the anchor.

use crate::algebroid::{apply_anchor, AVector};
use crate::error::{Error, Result};
use crate::metric::{inner, RiemannianAlgebroid};
use crate::numeric::{grid_derivative2, max_abs_diff, midpoint_value, norm, trapezoid};
use crate::paths::{parse_csv_rows, APath, FiberCurve, DEFAULT_STEP, USER_APATH_TOL};
use std::fmt::Write as _;

/// `|#(beta0) - d gamma / d eps|` allowed at `t = 0` for the solver.
pub const PRECONDITION_TOL: f64 = 1e-6;
/// A-posteriori transversality tolerance of the solver.
pub const TRANSVERSALITY_TOL: f64 = 1e-4;
/// `|beta(eps, 1)|` below which a fixed-endpoint variation is a homotopy.
pub const HOMOTOPY_TOL: f64 = 1e-5;

/// A field sampled on the mesh, `values[e * nt + k]`.
pub type MeshField = Vec<Vec<f64>>;

/// `alpha(eps, t)` and optionally `beta(eps, t)` on an `eps x t` mesh.
#[derive(Debug, Clone)]
pub struct VariationGrid {
    pub eps: Vec<f64>,
    pub t: Vec<f64>,
    /// `alpha[e * nt + k]` sits at `(eps[e], t[k])`.
    pub alpha: Vec<AVector>,
    pub beta: Option<MeshField>,
}

fn check_axis(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::MeshTooCoarse(format!("{name} grid has {} nodes, need 3", grid.len())));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::GridMismatch(format!("{name} grid must increase strictly")));
    }
    Ok(())
}

impl VariationGrid {
    pub fn new(eps: Vec<f64>, t: Vec<f64>, alpha: Vec<AVector>, beta: Option<MeshField>) -> Result<Self> {
        check_axis("eps", &eps)?;
        check_axis("t", &t)?;
        let size = eps.len() * t.len();
        if alpha.len() != size {
            return Err(Error::GridMismatch(format!("{} alpha nodes for a {}x{} mesh", alpha.len(), eps.len(), t.len())));
        }
        let (n, r) = (alpha[0].x.len(), alpha[0].mu.len());
        if alpha.iter().any(|a| a.x.len() != n || a.mu.len() != r) {
            return Err(Error::Dimension("alpha nodes differ in size".into()));
        }
        if let Some(b) = &beta {
            if b.len() != size || b.iter().any(|v| v.len() != r) {
                return Err(Error::GridMismatch("beta does not match the mesh".into()));
            }
        }
        Ok(VariationGrid { eps, t, alpha, beta })
    }

    /// Stacks paths sharing one time grid, one per `eps` node.
    pub fn from_paths(eps: Vec<f64>, paths: &[APath]) -> Result<Self> {
        if paths.len() != eps.len() {
            return Err(Error::GridMismatch(format!("{} paths for {} eps nodes", paths.len(), eps.len())));
        }
        let t = paths.first().map(|p| p.grid.clone()).unwrap_or_default();
        if paths.iter().any(|p| p.grid != t) {
            return Err(Error::GridMismatch("paths use different time grids".into()));
        }
        let alpha = paths.iter().flat_map(|p| p.states.iter().cloned()).collect();
        VariationGrid::new(eps, t, alpha, None)
    }

    pub fn n(&self) -> usize {
        self.alpha[0].x.len()
    }

    pub fn r(&self) -> usize {
        self.alpha[0].mu.len()
    }

    fn nt(&self) -> usize {
        self.t.len()
    }

    pub fn node(&self, e: usize, k: usize) -> &AVector {
        &self.alpha[e * self.nt() + k]
    }

    pub fn with_beta(mut self, beta: MeshField) -> Result<Self> {
        self.beta = Some(beta);
        VariationGrid::new(self.eps, self.t, self.alpha, self.beta)
    }

    fn beta(&self) -> Result<&MeshField> {
        self.beta
            .as_ref()
            .ok_or_else(|| Error::Precondition("the grid carries no transverse variation".into()))
    }

    /// The `eps[e]` row as an A-path.
    pub fn row(&self, e: usize) -> Result<APath> {
        let nt = self.nt();
        APath::new(self.t.clone(), self.alpha[e * nt..(e + 1) * nt].to_vec())
    }

    fn field<F: Fn(&AVector) -> Vec<f64>>(&self, f: F) -> MeshField {
        self.alpha.iter().map(f).collect()
    }

    /// `d/dt` of a mesh field.
    pub fn d_t(&self, f: &[Vec<f64>]) -> MeshField {
        let nt = self.nt();
        let mut out = Vec::with_capacity(f.len());
        for row in f.chunks(nt) {
            out.extend(crate::numeric::grid_derivative_vec(&self.t, row, grid_derivative2));
        }
        out
    }

    /// `d/deps` of a mesh field.
    pub fn d_eps(&self, f: &[Vec<f64>]) -> MeshField {
        let (ne, nt) = (self.eps.len(), self.nt());
        let dim = f.first().map_or(0, |v| v.len());
        let mut out = vec![vec![0.0; dim]; f.len()];
        let mut column = vec![0.0; ne];
        for k in 0..nt {
            for c in 0..dim {
                for e in 0..ne {
                    column[e] = f[e * nt + k][c];
                }
                for (e, d) in grid_derivative2(&self.eps, &column).into_iter().enumerate() {
                    out[e * nt + k][c] = d;
                }
            }
        }
        out
    }

    /// Largest A-path residual over the rows.
    pub fn apath_residual(&self, geom: &RiemannianAlgebroid) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for e in 0..self.eps.len() {
            worst = worst.max(self.row(e)?.apath_residual(geom)?);
        }
        Ok(worst)
    }

    /// `max |#(beta) - d gamma / d eps|` over the rows `eps_rows`.
    fn transversality_on(&self, geom: &RiemannianAlgebroid, eps_rows: std::ops::Range<usize>) -> Result<f64> {
        let beta = self.beta()?;
        let n = self.n();
        let dx = self.d_eps(&self.field(|a| a.x.clone()));
        let nt = self.nt();
        let mut worst: f64 = 0.0;
        for e in eps_rows {
            for k in 0..nt {
                let idx = e * nt + k;
                let b = geom.chart.anchor_matrix(&self.alpha[idx].x)?;
                worst = worst.max(max_abs_diff(&apply_anchor(&b, &beta[idx], n), &dx[idx]));
            }
        }
        Ok(worst)
    }

    /// `max |#(beta) - d gamma / d eps|` at nodes interior in `eps`.
    pub fn transversality_residual(&self, geom: &RiemannianAlgebroid) -> Result<f64> {
        self.transversality_on(geom, 1..self.eps.len() - 1)
    }

    /// CSV with columns `eps,t,x..,mu..[,beta..]`, `eps` outermost.
    pub fn to_csv(&self) -> String {
        let (n, r) = (self.n(), self.r());
        let mut out = String::from("eps,t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        for u in 1..=r {
            let _ = write!(out, ",mu{u}");
        }
        if self.beta.is_some() {
            for u in 1..=r {
                let _ = write!(out, ",beta{u}");
            }
        }
        out.push('\n');
        let nt = self.nt();
        for (e, eps) in self.eps.iter().enumerate() {
            for (k, t) in self.t.iter().enumerate() {
                let idx = e * nt + k;
                let _ = write!(out, "{eps:.16e},{t:.16e}");
                let a = &self.alpha[idx];
                let extra = self.beta.as_ref().map(|b| &b[idx][..]).unwrap_or(&[]);
                for c in a.x.iter().chain(&a.mu).chain(extra) {
                    let _ = write!(out, ",{c:.16e}");
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_csv(text: &str, n: usize, r: usize, with_beta: bool) -> Result<Self> {
        let width = 2 + n + r + if with_beta { r } else { 0 };
        let rows = parse_csv_rows(text, width)?;
        if rows.is_empty() {
            return Err(Error::Csv {
                line: 1,
                message: "no data rows".into(),
            });
        }
        let e0 = rows[0][0];
        let nt = rows.iter().take_while(|row| row[0] == e0).count();
        if rows.len() % nt != 0 {
            return Err(Error::GridMismatch("rows do not form a rectangular mesh".into()));
        }
        let t: Vec<f64> = rows[..nt].iter().map(|row| row[1]).collect();
        let eps: Vec<f64> = rows.iter().step_by(nt).map(|row| row[0]).collect();
        for (i, row) in rows.iter().enumerate() {
            if row[0] != eps[i / nt] || row[1] != t[i % nt] {
                return Err(Error::Csv {
                    line: i + 2,
                    message: "row breaks the eps-major mesh order".into(),
                });
            }
        }
        let alpha = rows
            .iter()
            .map(|row| AVector::new(row[2..2 + n].to_vec(), row[2 + n..2 + n + r].to_vec()))
            .collect();
        let beta = with_beta.then(|| rows.iter().map(|row| row[2 + n + r..].to_vec()).collect());
        VariationGrid::new(eps, t, alpha, beta)
    }
}

/// Output of [`RiemannianAlgebroid::solve_transverse`].
#[derive(Debug, Clone)]
pub struct TransverseSolution {
    pub grid: VariationGrid,
    /// `max |#(beta) - d gamma / d eps|` at eps-interior nodes.
    pub transversality: f64,
}

impl TransverseSolution {
    /// `max_eps |beta(eps, t_end)|`.
    pub fn endpoint_norm(&self) -> f64 {
        let g = &self.grid;
        let nt = g.t.len();
        let beta = g.beta.as_ref().expect("solver output carries beta");
        (0..g.eps.len()).map(|e| norm(&beta[e * nt + nt - 1])).fold(0.0, f64::max)
    }

    /// A fixed-endpoint variation solved from `beta0 = 0` is a homotopy iff
    /// `beta` also vanishes at the far end.
    pub fn is_homotopy(&self) -> bool {
        self.endpoint_norm() < HOMOTOPY_TOL
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FirstVariation {
    /// `dE/deps` by differencing the energies.
    pub lhs: f64,
    /// Boundary term minus the two integrals.
    pub rhs: f64,
}

impl FirstVariation {
    pub fn residual(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

#[derive(Debug, Clone)]
pub struct PencilReport {
    /// `beta(0, t)` from the transverse solver on the geodesic pencil.
    pub pencil: FiberCurve,
    /// The Jacobi field with `beta(0) = 0`, `D beta(0) = u`.
    pub jacobi: FiberCurve,
    pub deviation: f64,
}

impl RiemannianAlgebroid {
    /// `Delta = d_t beta - d_eps alpha + Gamma(alpha, beta) - Gamma(beta, alpha)` at every node.
    pub fn delta(&self, grid: &VariationGrid) -> Result<MeshField> {
        let beta = grid.beta()?;
        let mu = grid.field(|a| a.mu.clone());
        let dt_beta = grid.d_t(beta);
        let de_alpha = grid.d_eps(&mu);
        let mut out = Vec::with_capacity(mu.len());
        for (idx, a) in grid.alpha.iter().enumerate() {
            let p = self.point(&a.x, false)?;
            let g1 = p.gamma(&a.mu, &beta[idx]);
            let g2 = p.gamma(&beta[idx], &a.mu);
            out.push((0..a.mu.len()).map(|u| dt_beta[idx][u] - de_alpha[idx][u] + g1[u] - g2[u]).collect());
        }
        Ok(out)
    }

    /// `max |#(Delta)|` over nodes interior in both directions.
    pub fn delta_anchor_residual(&self, grid: &VariationGrid) -> Result<f64> {
        let delta = self.delta(grid)?;
        let nt = grid.t.len();
        let mut worst: f64 = 0.0;
        for e in 1..grid.eps.len() - 1 {
            for k in 1..nt - 1 {
                let idx = e * nt + k;
                let b = self.chart.anchor_matrix(&grid.alpha[idx].x)?;
                worst = worst.max(norm(&apply_anchor(&b, &delta[idx], self.n())));
            }
        }
        Ok(worst)
    }

    /// Solves `Delta = 0` for `beta` along every row, from `beta0[e]` at the first time node.
    pub fn solve_transverse(&self, grid: &VariationGrid, beta0: &[Vec<f64>]) -> Result<TransverseSolution> {
        let (ne, nt, r) = (grid.eps.len(), grid.t.len(), self.r());
        if beta0.len() != ne {
            return Err(Error::GridMismatch(format!("{} initial values for {ne} eps nodes", beta0.len())));
        }
        for b in beta0 {
            self.chart.check_fiber(b)?;
        }
        let mu = grid.field(|a| a.mu.clone());
        let forcing = grid.d_eps(&mu);
        let mut worst_pre: f64 = 0.0;
        {
            let dx = grid.d_eps(&grid.field(|a| a.x.clone()));
            for e in 0..ne {
                let a = grid.node(e, 0);
                let b = self.chart.anchor_matrix(&a.x)?;
                worst_pre = worst_pre.max(max_abs_diff(&apply_anchor(&b, &beta0[e], self.n()), &dx[e * nt]));
            }
        }
        if !(worst_pre < PRECONDITION_TOL) {
            return Err(Error::Precondition(format!(
                "initial transverse values miss d gamma/d eps by {worst_pre:e}"
            )));
        }
        let coeff = |s: &AVector| -> Result<Vec<f64>> {
            // column i: Gamma(e_i, alpha) - Gamma(alpha, e_i)
            let p = self.point(&s.x, false)?;
            let mut m = vec![0.0; r * r];
            for i in 0..r {
                let mut e = vec![0.0; r];
                e[i] = 1.0;
                let a = p.gamma(&e, &s.mu);
                let b = p.gamma(&s.mu, &e);
                for u in 0..r {
                    m[u * r + i] = a[u] - b[u];
                }
            }
            Ok(m)
        };
        let mut beta = Vec::with_capacity(ne * nt);
        for e in 0..ne {
            let row = grid.row(e)?;
            let nodes = row.states.iter().map(&coeff).collect::<Result<Vec<_>>>()?;
            let mids = (0..nt - 1).map(|k| coeff(&row.midpoint(k).0)).collect::<Result<Vec<_>>>()?;
            let f_nodes = &forcing[e * nt..(e + 1) * nt];
            let f_mids: Vec<Vec<f64>> = (0..nt - 1)
                .map(|k| {
                    (0..r)
                        .map(|u| {
                            let col: Vec<f64> = f_nodes.iter().map(|v| v[u]).collect();
                            midpoint_value(&grid.t, &col, k)
                        })
                        .collect()
                })
                .collect();
            beta.extend(crate::paths::linear_rk4(
                &grid.t,
                &nodes,
                &mids,
                Some((f_nodes, &f_mids)),
                &beta0[e],
                false,
            ));
        }
        let out = grid.clone().with_beta(beta)?;
        let transversality = out.transversality_residual(self)?;
        if !(transversality <= TRANSVERSALITY_TOL) {
            return Err(Error::Transversality {
                residual: transversality,
                tolerance: TRANSVERSALITY_TOL,
            });
        }
        Ok(TransverseSolution {
            grid: out,
            transversality,
        })
    }

    /// `max | D_t D_eps s - D_eps D_t s - R(alpha, beta) s - D_Delta s |` over
    /// nodes interior in both directions.
    pub fn curvature_commutation_residual(&self, grid: &VariationGrid, s: &[Vec<f64>]) -> Result<f64> {
        let beta = grid.beta()?;
        let (ne, nt) = (grid.eps.len(), grid.t.len());
        if s.len() != ne * nt || s.iter().any(|v| v.len() != self.r()) {
            return Err(Error::GridMismatch("section does not match the mesh".into()));
        }
        let points = grid
            .alpha
            .iter()
            .map(|a| self.point(&a.x, true))
            .collect::<Result<Vec<_>>>()?;
        let along = |f: &[Vec<f64>], dir: &[Vec<f64>], d: MeshField| -> MeshField {
            d.into_iter()
                .enumerate()
                .map(|(idx, v)| {
                    let g = points[idx].gamma(&dir[idx], &f[idx]);
                    v.iter().zip(g).map(|(a, b)| a + b).collect()
                })
                .collect()
        };
        let mu = grid.field(|a| a.mu.clone());
        let ds_eps = along(s, beta, grid.d_eps(s));
        let ds_t = along(s, &mu, grid.d_t(s));
        let dt_de = along(&ds_eps, &mu, grid.d_t(&ds_eps));
        let de_dt = along(&ds_t, beta, grid.d_eps(&ds_t));
        let delta = self.delta(grid)?;
        let mut worst: f64 = 0.0;
        for e in 1..ne - 1 {
            for k in 1..nt - 1 {
                let idx = e * nt + k;
                let p = &points[idx];
                let rs = p.curvature().apply(&mu[idx], &beta[idx], &s[idx]);
                // Delta is vertical, so D_Delta s needs no derivative of s
                let ds = p.gamma(&delta[idx], &s[idx]);
                for u in 0..self.r() {
                    worst = worst.max((dt_de[idx][u] - de_dt[idx][u] - rs[u] - ds[u]).abs());
                }
            }
        }
        Ok(worst)
    }

    /// Both sides of the first variation formula for the energy, on the
    /// middle `eps` row.
    pub fn first_variation(&self, grid: &VariationGrid) -> Result<FirstVariation> {
        let beta = grid.beta()?;
        let (ne, nt) = (grid.eps.len(), grid.t.len());
        let mid = ne / 2;
        let energies = (0..ne)
            .map(|e| {
                let f = (0..nt)
                    .map(|k| {
                        let a = grid.node(e, k);
                        Ok(0.5 * inner(&self.metric.values(&a.x)?, &a.mu, &a.mu))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(trapezoid(&grid.t, &f))
            })
            .collect::<Result<Vec<f64>>>()?;
        let lhs = grid_derivative2(&grid.eps, &energies)[mid];

        let row = grid.row(mid)?;
        let alpha_row = FiberCurve::new(grid.t.clone(), row.mus())?;
        let mu_mesh = grid.field(|a| a.mu.clone());
        let dt_alpha = grid.d_t(&mu_mesh);
        let delta = self.delta(grid)?;
        let mut f1 = Vec::with_capacity(nt);
        let mut f2 = Vec::with_capacity(nt);
        let mut boundary = [0.0; 2];
        for k in 0..nt {
            let idx = mid * nt + k;
            let a = &row.states[k];
            let p = self.point(&a.x, false)?;
            let d_alpha: Vec<f64> = dt_alpha[idx]
                .iter()
                .zip(p.gamma(&alpha_row.values[k], &a.mu))
                .map(|(x, y)| x + y)
                .collect();
            f1.push(p.inner(&beta[idx], &d_alpha));
            f2.push(p.inner(&delta[idx], &a.mu));
            if k == 0 {
                boundary[0] = p.inner(&beta[idx], &a.mu);
            }
            if k == nt - 1 {
                boundary[1] = p.inner(&beta[idx], &a.mu);
            }
        }
        let rhs = boundary[1] - boundary[0] - trapezoid(&grid.t, &f1) - trapezoid(&grid.t, &f2);
        Ok(FirstVariation { lhs, rhs })
    }

    /// Geodesics from `(x, mu + eps u)` for every `eps`, on `[0, 1]` with step `h`.
    pub fn geodesic_pencil(&self, a: &AVector, u: &[f64], eps: &[f64], h: f64) -> Result<VariationGrid> {
        self.chart.check_fiber(u)?;
        let paths = eps
            .iter()
            .map(|e| {
                let mu = a.mu.iter().zip(u).map(|(m, d)| m + e * d).collect();
                self.geodesic(&AVector::new(a.x.clone(), mu), (0.0, 1.0), h)
            })
            .collect::<Result<Vec<_>>>()?;
        VariationGrid::from_paths(eps.to_vec(), &paths)
    }

    /// Compares the transverse variation of the geodesic pencil through
    /// `a` in direction `u` with the Jacobi field `beta(0) = 0`, `D beta(0) = u`.
    pub fn jacobi_from_geodesic_pencil(&self, a: &AVector, u: &[f64], eps_step: f64) -> Result<PencilReport> {
        let eps = [-eps_step, 0.0, eps_step];
        let pencil = self.geodesic_pencil(a, u, &eps, DEFAULT_STEP)?;
        let r = self.r();
        let sol = self.solve_transverse(&pencil, &vec![vec![0.0; r]; 3])?;
        let nt = pencil.t.len();
        let beta = sol.grid.beta.as_ref().expect("solver output carries beta");
        let middle = FiberCurve::new(pencil.t.clone(), beta[nt..2 * nt].to_vec())?;
        let path = pencil.row(1)?;
        // the row rebuilt from nodes loses the integrator's slopes but not its accuracy
        let jacobi = self.jacobi(&self.geodesic(&path.states[0], (0.0, 1.0), DEFAULT_STEP)?, &vec![0.0; r], u)?;
        let deviation = middle
            .values
            .iter()
            .zip(&jacobi.values)
            .map(|(p, q)| max_abs_diff(p, q))
            .fold(0.0, f64::max);
        Ok(PencilReport {
            pencil: middle,
            jacobi,
            deviation,
        })
    }

    /// Largest A-path residual of the rows must stay below the user-path tolerance.
    pub fn check_variation(&self, grid: &VariationGrid) -> Result<()> {
        let res = grid.apath_residual(self)?;
        if !(res < USER_APATH_TOL) {
            return Err(Error::Precondition(format!("rows are not A-paths (residual {res:e})")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::numeric::uniform_grid;
    use std::f64::consts::PI;

    fn geom(name: &str) -> RiemannianAlgebroid {
        catalog::get(name).unwrap().geometry()
    }

    /// Variation with base `gamma(eps, t)` in a chart with `b = I` and
    /// `alpha = d gamma/dt`, `beta = d gamma/deps` given in closed form.
    fn classical(
        eps: Vec<f64>,
        t: Vec<f64>,
        gamma: impl Fn(f64, f64) -> [f64; 2],
        dt: impl Fn(f64, f64) -> [f64; 2],
        de: impl Fn(f64, f64) -> [f64; 2],
    ) -> VariationGrid {
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for &e in &eps {
            for &s in &t {
                alpha.push(AVector::new(gamma(e, s).to_vec(), dt(e, s).to_vec()));
                beta.push(de(e, s).to_vec());
            }
        }
        VariationGrid::new(eps, t, alpha, Some(beta)).unwrap()
    }

    #[test]
    fn straight_lines_have_no_defect() {
        let g = geom("euclidean2");
        let grid = classical(
            uniform_grid(-0.1, 0.1, 0.05),
            uniform_grid(0.0, 1.0, 0.1),
            |e, t| [t * (1.0 + e), 2.0 * t + e],
            |e, _| [1.0 + e, 2.0],
            |_, t| [t, 1.0],
        );
        let d = g.delta(&grid).unwrap();
        assert!(d.iter().all(|v| norm(v) < 1e-12));
        let sol = g
            .solve_transverse(
                &VariationGrid { beta: None, ..grid.clone() },
                &vec![vec![0.0, 1.0]; grid.eps.len()],
            )
            .unwrap();
        let beta = sol.grid.beta.as_ref().unwrap();
        assert!(beta.iter().zip(grid.beta.as_ref().unwrap()).all(|(a, b)| max_abs_diff(a, b) < 1e-12));
        let fv = g.first_variation(&grid).unwrap();
        assert!(fv.residual() < 1e-6);
    }

    #[test]
    fn fixed_endpoint_pencil_is_a_homotopy() {
        let g = geom("euclidean2");
        let eps = uniform_grid(-0.2, 0.2, 0.1);
        let t = uniform_grid(0.0, 1.0, 0.01);
        let grid = classical(
            eps.clone(),
            t,
            |e, t| [t, 0.5 * t + e * (PI * t).sin()],
            |e, t| [1.0, 0.5 + e * PI * (PI * t).cos()],
            |_, t| [0.0, (PI * t).sin()],
        );
        let sol = g
            .solve_transverse(&VariationGrid { beta: None, ..grid }, &vec![vec![0.0; 2]; eps.len()])
            .unwrap();
        assert!(sol.is_homotopy());
        let fv = g.first_variation(&sol.grid).unwrap();
        assert!(fv.lhs.abs() < 1e-5 && fv.residual() < 1e-5, "{fv:?}");
    }

    #[test]
    fn heisenberg_delta_is_vertical_and_solver_is_transverse() {
        let g = geom("heisenberg_central");
        let eps = uniform_grid(-0.1, 0.1, 0.01);
        let t = uniform_grid(0.0, 1.0, 0.001);
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for &e in &eps {
            for &s in &t {
                let x = [s + e * s * s, 0.3 * s.sin() * (1.0 + e * s)];
                let dx2 = 0.3 * (s.cos() * (1.0 + e * s) + e * s.sin());
                alpha.push(AVector::new(x.to_vec(), vec![1.0 + 2.0 * e * s, dx2, (e * s).cos()]));
                beta.push(vec![s * s, 0.3 * s.sin() * s, s - e]);
            }
        }
        let grid = VariationGrid::new(eps.clone(), t, alpha, Some(beta)).unwrap();
        let res = g.delta_anchor_residual(&grid).unwrap();
        assert!(res < 1e-5, "{res}");
        let d = g.delta(&grid).unwrap();
        assert!(d.iter().any(|v| v[2].abs() > 0.1));
        let plain = VariationGrid { beta: None, ..grid };
        let beta0 = vec![vec![0.0; 3]; eps.len()];
        let sol = g.solve_transverse(&plain, &beta0).unwrap();
        assert!(sol.transversality < 1e-5, "{}", sol.transversality);
        let again = g.solve_transverse(&plain, &beta0).unwrap();
        assert_eq!(sol.grid.beta, again.grid.beta);
        let fed_back = g.delta(&sol.grid).unwrap().iter().map(|v| norm(v)).fold(0.0, f64::max);
        assert!(fed_back < 1e-6, "{fed_back}");
        assert!(matches!(
            g.solve_transverse(&plain, &vec![vec![0.0, 1.0, 0.0]; eps.len()]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pencil_matches_jacobi_on_sphere() {
        let g = geom("sphere_chart");
        let rep = g
            .jacobi_from_geodesic_pencil(&AVector::new(vec![PI / 2.0, 0.5], vec![0.3, 1.0]), &[0.5, -0.2], 1e-3)
            .unwrap();
        assert!(rep.deviation < 1e-4, "{}", rep.deviation);
        let so3 = geom("so3_biinv");
        let rep = so3
            .jacobi_from_geodesic_pencil(&AVector::new(vec![0.0], vec![0.2, -0.1, 0.4]), &[0.0, 1.0, 0.5], 1e-3)
            .unwrap();
        assert!(rep.deviation < 1e-6, "{}", rep.deviation);
    }

    fn heisenberg_mesh(m: usize) -> (VariationGrid, MeshField) {
        let eps = uniform_grid(-0.5, 0.5, 1.0 / (m - 1) as f64);
        let t = uniform_grid(0.0, 1.0, 1.0 / (m - 1) as f64);
        let (mut alpha, mut beta, mut s) = (Vec::new(), Vec::new(), Vec::new());
        for &e in &eps {
            for &u in &t {
                let x = vec![u.sin() + e * u, (e * u).cos()];
                let mu = vec![u.cos() + e, -e * (e * u).sin(), (u + 2.0 * e).sin()];
                alpha.push(AVector::new(x, mu));
                beta.push(vec![u, -u * (e * u).sin(), (u * e).exp()]);
                s.push(vec![(u - e).cos(), e * u * u, 1.0 + (2.0 * u).sin()]);
            }
        }
        (VariationGrid::new(eps, t, alpha, Some(beta)).unwrap(), s)
    }

    #[test]
    fn curvature_commutation_converges() {
        let g = geom("heisenberg_central");
        let res: Vec<f64> = [21, 41, 81]
            .iter()
            .map(|&m| {
                let (grid, s) = heisenberg_mesh(m);
                g.curvature_commutation_residual(&grid, &s).unwrap()
            })
            .collect();
        let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        assert!(orders.iter().all(|o| *o > 1.9), "{res:?} {orders:?}");
        let eu = geom("euclidean2");
        let grid = classical(
            uniform_grid(0.0, 1.0, 0.1),
            uniform_grid(0.0, 1.0, 0.1),
            |e, t| [t, e],
            |_, _| [1.0, 0.0],
            |_, _| [0.0, 1.0],
        );
        let s: MeshField = grid.alpha.iter().map(|a| vec![a.x[0] * a.x[1], 1.0]).collect();
        assert!(eu.curvature_commutation_residual(&grid, &s).unwrap() < 1e-6);
    }

    #[test]
    fn sphere_pencil_commutation() {
        let g = geom("sphere_chart");
        let eps = uniform_grid(-0.1, 0.1, 0.005);
        let pencil = g
            .geodesic_pencil(&AVector::new(vec![PI / 2.0, 0.5], vec![0.3, 1.0]), &[0.4, -0.3], &eps, 0.025)
            .unwrap();
        let sol = g.solve_transverse(&pencil, &vec![vec![0.0; 2]; eps.len()]).unwrap();
        let mut s = Vec::new();
        for e in 0..eps.len() {
            let row = pencil.row(e).unwrap();
            s.extend(g.parallel_transport(&row, &[1.0, 0.5]).unwrap().values);
        }
        let res = g.curvature_commutation_residual(&sol.grid, &s).unwrap();
        assert!(res < 1e-3, "{res}");
    }

    #[test]
    fn latitude_circle_first_variation() {
        let g = geom("sphere_chart");
        let grid = classical(
            uniform_grid(-0.1, 0.1, 0.0025),
            uniform_grid(0.0, 1.0, 0.0125),
            |e, t| [1.0 + e, 0.5 + t],
            |_, _| [0.0, 1.0],
            |_, _| [1.0, 0.0],
        );
        let fv = g.first_variation(&grid).unwrap();
        assert!(fv.residual() < 1e-4, "{fv:?}");
        // d/deps of sin^2(1 + eps) / 2
        assert!((fv.lhs - 1f64.sin() * 1f64.cos()).abs() < 1e-4);
    }

    #[test]
    fn csv_round_trip() {
        let grid = classical(
            vec![0.0, 0.1, 0.2],
            vec![0.0, 0.5, 1.0],
            |e, t| [t, e],
            |_, _| [1.0, 0.0],
            |_, _| [0.0, 1.0],
        );
        let back = VariationGrid::from_csv(&grid.to_csv(), 2, 2, true).unwrap();
        assert_eq!(back.eps, grid.eps);
        assert_eq!(back.t, grid.t);
        assert_eq!(back.beta, grid.beta);
        assert_eq!(back.alpha, grid.alpha);
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let a = AVector::new(vec![0.0], vec![0.0]);
        assert!(matches!(
            VariationGrid::new(vec![0.0, 1.0], vec![0.0, 0.5, 1.0], vec![a; 6], None),
            Err(Error::MeshTooCoarse(_))
        ));
    }
}
