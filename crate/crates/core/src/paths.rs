//! A-paths, geodesics, parallel transport and Jacobi fields.
//!
//! Everything runs on fixed-step RK4. Generated paths keep the RK right-hand
//! side at every node so that dense output is cubic Hermite; linear ODEs
//! along a path (transport, Jacobi) take their coefficients at the nodes and
//! at segment midpoints from that dense output.

use crate::algebroid::{apply_anchor, AVector};
use crate::error::{Error, Result};
use crate::metric::RiemannianAlgebroid;
use crate::numeric::{grid_derivative4, grid_derivative_vec, hermite, invert, rk4_step, uniform_grid};
use std::fmt::Write as _;

pub const DEFAULT_STEP: f64 = 1e-3;
/// A-path tolerance for generated paths.
pub const APATH_TOL: f64 = 1e-9;
/// A-path tolerance for user-supplied discrete paths.
pub const USER_APATH_TOL: f64 = 1e-6;
/// How far `D^alpha alpha` may be from zero for a path to count as a geodesic.
pub const GEODESIC_TOL: f64 = 1e-6;

/// A time-discretized A-path with dense output.
#[derive(Debug, Clone)]
pub struct APath {
    pub grid: Vec<f64>,
    pub states: Vec<AVector>,
    /// `d/dt (x, mu)` at each node.
    slopes: Vec<Vec<f64>>,
    generated: bool,
}

/// A fiber-valued curve over the nodes of an [`APath`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiberCurve {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl FiberCurve {
    pub fn new(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} times but {} values",
                grid.len(),
                values.len()
            )));
        }
        Ok(FiberCurve { grid, values })
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("curves are never empty")
    }

    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn to_csv(&self) -> String {
        let r = self.values.first().map_or(0, |v| v.len());
        let mut out = String::from("t");
        for u in 1..=r {
            let _ = write!(out, ",s{u}");
        }
        out.push('\n');
        for (t, v) in self.grid.iter().zip(&self.values) {
            let _ = write!(out, "{t:.16e}");
            for c in v {
                let _ = write!(out, ",{c:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, r: usize) -> Result<Self> {
        let rows = parse_csv_rows(text, 1 + r)?;
        let grid = rows.iter().map(|row| row[0]).collect();
        let values = rows.iter().map(|row| row[1..].to_vec()).collect();
        FiberCurve::new(grid, values)
    }
}

pub(crate) fn parse_csv_rows(text: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Csv {
                line: k + 1,
                message: e.to_string(),
            })?;
        if row.len() != width {
            return Err(Error::Csv {
                line: k + 1,
                message: format!("expected {width} columns, found {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

impl APath {
    /// A user-supplied discrete path. Node velocities come from grid differences.
    pub fn new(grid: Vec<f64>, states: Vec<AVector>) -> Result<Self> {
        if grid.len() != states.len() {
            return Err(Error::GridMismatch(format!("{} times but {} states", grid.len(), states.len())));
        }
        if grid.len() < 3 {
            return Err(Error::MeshTooCoarse("a path needs at least three nodes".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("path times must increase strictly".into()));
        }
        let flat: Vec<Vec<f64>> = states.iter().map(|s| [s.x.clone(), s.mu.clone()].concat()).collect();
        let slopes = grid_derivative_vec(&grid, &flat, grid_derivative4);
        Ok(APath {
            grid,
            states,
            slopes,
            generated: false,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn n(&self) -> usize {
        self.states[0].x.len()
    }

    pub fn r(&self) -> usize {
        self.states[0].mu.len()
    }

    pub fn start(&self) -> &AVector {
        &self.states[0]
    }

    pub fn end(&self) -> &AVector {
        self.states.last().expect("paths are never empty")
    }

    pub fn is_generated(&self) -> bool {
        self.generated
    }

    pub fn mus(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.mu.clone()).collect()
    }

    fn segment_of(&self, t: f64) -> usize {
        let k = self.grid.partition_point(|&g| g <= t);
        k.clamp(1, self.grid.len() - 1) - 1
    }

    /// Dense state and its time derivative at `t` (clamped to the grid).
    pub fn at(&self, t: f64) -> (AVector, Vec<f64>) {
        let t = t.clamp(self.grid[0], *self.grid.last().unwrap());
        let k = self.segment_of(t);
        self.interpolate(k, t)
    }

    /// Dense state at the midpoint of segment `k`.
    pub fn midpoint(&self, k: usize) -> (AVector, Vec<f64>) {
        self.interpolate(k, 0.5 * (self.grid[k] + self.grid[k + 1]))
    }

    fn interpolate(&self, k: usize, t: f64) -> (AVector, Vec<f64>) {
        let (t0, t1) = (self.grid[k], self.grid[k + 1]);
        let a = [&self.states[k].x[..], &self.states[k].mu[..]].concat();
        let b = [&self.states[k + 1].x[..], &self.states[k + 1].mu[..]].concat();
        let mut vals = Vec::with_capacity(a.len());
        let mut ders = Vec::with_capacity(a.len());
        for c in 0..a.len() {
            let (v, d) = hermite(t0, t1, a[c], b[c], self.slopes[k][c], self.slopes[k + 1][c], t);
            vals.push(v);
            ders.push(d);
        }
        let n = self.n();
        let mu = vals.split_off(n);
        (AVector::new(vals, mu), ders)
    }

    /// Max over segment midpoints of `|#(alpha) - d/dt x|`.
    pub fn apath_residual(&self, geom: &RiemannianAlgebroid) -> Result<f64> {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for k in 0..self.len() - 1 {
            let (s, d) = self.midpoint(k);
            let b = geom.chart.anchor_matrix(&s.x)?;
            let t = apply_anchor(&b, &s.mu, n);
            for i in 0..n {
                worst = worst.max((t[i] - d[i]).abs());
            }
        }
        Ok(worst)
    }

    /// Tolerance that applies to this path's A-path residual.
    pub fn apath_tolerance(&self) -> f64 {
        if self.generated {
            APATH_TOL
        } else {
            USER_APATH_TOL
        }
    }

    /// `E = <mu, mu> / 2` at every node.
    pub fn energies(&self, geom: &RiemannianAlgebroid) -> Result<Vec<f64>> {
        self.states.iter().map(|s| energy(geom, s)).collect()
    }

    /// `max_t |E(t) - E(0)| / E(0)` (absolute when `E(0) = 0`).
    pub fn relative_energy_drift(&self, geom: &RiemannianAlgebroid) -> Result<f64> {
        let e = self.energies(geom)?;
        let scale = if e[0] > 0.0 { e[0] } else { 1.0 };
        Ok(e.iter().map(|v| (v - e[0]).abs() / scale).fold(0.0, f64::max))
    }

    pub fn to_csv(&self) -> String {
        let (n, r) = (self.n(), self.r());
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",x{i}");
        }
        for u in 1..=r {
            let _ = write!(out, ",mu{u}");
        }
        out.push('\n');
        for (t, s) in self.grid.iter().zip(&self.states) {
            let _ = write!(out, "{t:.16e}");
            for v in s.x.iter().chain(&s.mu) {
                let _ = write!(out, ",{v:.16e}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, n: usize, r: usize) -> Result<Self> {
        let rows = parse_csv_rows(text, 1 + n + r)?;
        let grid = rows.iter().map(|row| row[0]).collect();
        let states = rows
            .iter()
            .map(|row| AVector::new(row[1..1 + n].to_vec(), row[1 + n..].to_vec()))
            .collect();
        APath::new(grid, states)
    }
}

pub fn energy(geom: &RiemannianAlgebroid, v: &AVector) -> Result<f64> {
    let g = geom.metric.values(&v.x)?;
    Ok(0.5 * crate::metric::inner(&g, &v.mu, &v.mu))
}

impl RiemannianAlgebroid {
    /// Right side of the geodesic system: `x' = #(mu)`, `mu' = -Gamma(mu, mu)`.
    pub fn geodesic_field(&self, v: &AVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let p = self.point(&v.x, false)?;
        let dx = p.anchor(&v.mu);
        let dmu = p.gamma(&v.mu, &v.mu).into_iter().map(|c| -c).collect();
        Ok((dx, dmu))
    }

    fn geodesic_rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        let (dx, dmu) = self.geodesic_field(&AVector::new(y[..n].to_vec(), y[n..].to_vec()))?;
        Ok([dx, dmu].concat())
    }

    /// Integrates the geodesic from `start` over `[t0, t1]` with step `h`.
    ///
    /// Leaving the chart domain is an error carrying the path up to the last
    /// node that was still inside.
    pub fn geodesic(&self, start: &AVector, t_span: (f64, f64), h: f64) -> Result<APath> {
        let (n, r) = (self.n(), self.r());
        self.chart.check_point(&start.x)?;
        self.chart.check_fiber(&start.mu)?;
        let (t0, t1) = t_span;
        if !(t1 > t0) || !(h > 0.0) {
            return Err(Error::Precondition("geodesic needs t1 > t0 and a positive step".into()));
        }
        let grid = uniform_grid(t0, t1, h);
        let mut y = [start.x.clone(), start.mu.clone()].concat();
        let mut slope = self.geodesic_rhs(&y)?;
        let mut states = vec![start.clone()];
        let mut slopes = Vec::with_capacity(grid.len());
        let mut f = |_t: f64, y: &[f64]| self.geodesic_rhs(y);
        for k in 0..grid.len() - 1 {
            let step = grid[k + 1] - grid[k];
            let next = rk4_step(&mut f, grid[k], &y, step, slope.clone())?;
            let inside = self.chart.contains(&next[..n]);
            let next_slope = if inside { f(grid[k + 1], &next).ok() } else { None };
            let Some(next_slope) = next_slope else {
                slopes.push(slope);
                let partial = APath {
                    grid: grid[..=k].to_vec(),
                    states,
                    slopes,
                    generated: true,
                };
                return Err(Error::DomainExit {
                    t: grid[k + 1],
                    partial: Box::new(partial),
                });
            };
            slopes.push(std::mem::replace(&mut slope, next_slope));
            y = next;
            states.push(AVector::new(y[..n].to_vec(), y[n..n + r].to_vec()));
        }
        slopes.push(slope);
        Ok(APath {
            grid,
            states,
            slopes,
            generated: true,
        })
    }

    /// Base point of the time-one geodesic from `(m, a)`.
    pub fn exp_map(&self, m: &[f64], a: &[f64], h: f64) -> Result<Vec<f64>> {
        let path = self.geodesic(&AVector::new(m.to_vec(), a.to_vec()), (0.0, 1.0), h)?;
        Ok(path.end().x.clone())
    }

    /// Coefficient matrix `M[u][j] = -sum_i alpha_i Gamma_ij^u` of the transport ODE.
    fn transport_matrix(&self, s: &AVector) -> Result<Vec<f64>> {
        let r = self.r();
        let p = self.point(&s.x, false)?;
        let mut m = vec![0.0; r * r];
        for j in 0..r {
            let mut e = vec![0.0; r];
            e[j] = 1.0;
            let col = p.gamma(&s.mu, &e);
            for u in 0..r {
                m[u * r + j] = -col[u];
            }
        }
        Ok(m)
    }

    fn path_coefficients(
        &self,
        path: &APath,
        coeff: impl Fn(&AVector) -> Result<Vec<f64>>,
    ) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let nodes = path.states.iter().map(&coeff).collect::<Result<Vec<_>>>()?;
        let mids = (0..path.len() - 1)
            .map(|k| coeff(&path.midpoint(k).0))
            .collect::<Result<Vec<_>>>()?;
        Ok((nodes, mids))
    }

    /// Parallel transport of `s0` from the start of `path`.
    pub fn parallel_transport(&self, path: &APath, s0: &[f64]) -> Result<FiberCurve> {
        self.chart.check_fiber(s0)?;
        let (nodes, mids) = self.path_coefficients(path, |s| self.transport_matrix(s))?;
        let values = linear_rk4(&path.grid, &nodes, &mids, None, s0, false);
        FiberCurve::new(path.grid.clone(), values)
    }

    /// Parallel transport of `s_end` backwards from the end of `path`.
    pub fn parallel_transport_reverse(&self, path: &APath, s_end: &[f64]) -> Result<FiberCurve> {
        self.chart.check_fiber(s_end)?;
        let (nodes, mids) = self.path_coefficients(path, |s| self.transport_matrix(s))?;
        let values = linear_rk4(&path.grid, &nodes, &mids, None, s_end, true);
        FiberCurve::new(path.grid.clone(), values)
    }

    /// Transport matrices `tau_t` (row-major `r x r`) at every node.
    pub fn transport_matrices(&self, path: &APath) -> Result<Vec<Vec<f64>>> {
        let r = self.r();
        let (nodes, mids) = self.path_coefficients(path, |s| self.transport_matrix(s))?;
        let mut out = vec![vec![0.0; r * r]; path.len()];
        for j in 0..r {
            let mut e = vec![0.0; r];
            e[j] = 1.0;
            for (k, v) in linear_rk4(&path.grid, &nodes, &mids, None, &e, false).into_iter().enumerate() {
                for u in 0..r {
                    out[k][u * r + j] = v[u];
                }
            }
        }
        Ok(out)
    }

    /// `(D^alpha s)(t) = s'(t) + Gamma(alpha(t), s(t))` on the path nodes.
    pub fn derivative_along(&self, path: &APath, s: &FiberCurve) -> Result<FiberCurve> {
        if s.grid.len() != path.len() || s.grid.iter().zip(&path.grid).any(|(a, b)| a != b) {
            return Err(Error::GridMismatch("curve and path grids differ".into()));
        }
        if path.len() < 3 {
            return Err(Error::MeshTooCoarse("need at least three nodes".into()));
        }
        let ds = grid_derivative_vec(&s.grid, &s.values, grid_derivative4);
        let mut out = Vec::with_capacity(path.len());
        for ((state, sv), d) in path.states.iter().zip(&s.values).zip(ds) {
            let p = self.point(&state.x, false)?;
            let g = p.gamma(&state.mu, sv);
            out.push(d.iter().zip(g).map(|(a, b)| a + b).collect());
        }
        FiberCurve::new(path.grid.clone(), out)
    }

    /// Max norm of `D^alpha alpha` over the path.
    pub fn geodesic_residual(&self, path: &APath) -> Result<f64> {
        let alpha = FiberCurve::new(path.grid.clone(), path.mus())?;
        Ok(self.derivative_along(path, &alpha)?.max_norm())
    }

    /// Jacobi field along a geodesic with `beta(0) = beta0`, `(D beta)(0) = dbeta0`.
    ///
    /// The state is `(beta, w = D beta)`: `beta' = w - Gamma(alpha, beta)` and
    /// `w' = R(alpha, beta) alpha - Gamma(alpha, w)`.
    pub fn jacobi(&self, path: &APath, beta0: &[f64], dbeta0: &[f64]) -> Result<FiberCurve> {
        Ok(self.jacobi_with_derivative(path, beta0, dbeta0)?.0)
    }

    /// Like [`Self::jacobi`], also returning `D beta`.
    pub fn jacobi_with_derivative(
        &self,
        path: &APath,
        beta0: &[f64],
        dbeta0: &[f64],
    ) -> Result<(FiberCurve, FiberCurve)> {
        let r = self.r();
        self.chart.check_fiber(beta0)?;
        self.chart.check_fiber(dbeta0)?;
        let res = self.geodesic_residual(path)?;
        if !(res < GEODESIC_TOL) {
            return Err(Error::NotGeodesic(res));
        }
        let (nodes, mids) = self.path_coefficients(path, |s| self.jacobi_matrix(s))?;
        let y0 = [beta0, dbeta0].concat();
        let values = linear_rk4(&path.grid, &nodes, &mids, None, &y0, false);
        let beta = values.iter().map(|v| v[..r].to_vec()).collect();
        let w = values.iter().map(|v| v[r..].to_vec()).collect();
        Ok((FiberCurve::new(path.grid.clone(), beta)?, FiberCurve::new(path.grid.clone(), w)?))
    }

    fn jacobi_matrix(&self, s: &AVector) -> Result<Vec<f64>> {
        let r = self.r();
        let p = self.point(&s.x, true)?;
        let curv = p.curvature();
        let t = self.transport_matrix(s)?;
        let m = 2 * r;
        let mut a = vec![0.0; m * m];
        for u in 0..r {
            for j in 0..r {
                a[u * m + j] = t[u * r + j];
                a[(r + u) * m + r + j] = t[u * r + j];
            }
            a[u * m + r + u] = 1.0;
        }
        for j in 0..r {
            let mut e = vec![0.0; r];
            e[j] = 1.0;
            let col = curv.apply(&s.mu, &e, &s.mu);
            for l in 0..r {
                a[(r + l) * m + j] = col[l];
            }
        }
        Ok(a)
    }

    /// `d_a exp_m(u) = #(beta(1))` for the Jacobi field with `beta(0) = 0`, `beta'(0) = u`.
    pub fn dexp(&self, m: &[f64], a: &[f64], u: &[f64], h: f64) -> Result<Vec<f64>> {
        let path = self.geodesic(&AVector::new(m.to_vec(), a.to_vec()), (0.0, 1.0), h)?;
        let beta = self.jacobi(&path, &vec![0.0; self.r()], u)?;
        let end = path.end();
        let b = self.chart.anchor_matrix(&end.x)?;
        Ok(apply_anchor(&b, beta.last(), self.n()))
    }

    /// `(tau_t)^{-1}` applied to `v_t` at every node: pulls a field along the
    /// path back into the fiber over the starting point.
    pub fn pull_back_to_start(&self, path: &APath, v: &FiberCurve) -> Result<FiberCurve> {
        let r = self.r();
        let taus = self.transport_matrices(path)?;
        let mut out = Vec::with_capacity(path.len());
        for (tau, vt) in taus.iter().zip(&v.values) {
            let inv = invert(tau, r).ok_or_else(|| Error::Precondition("transport is not invertible".into()))?;
            out.push(crate::metric::mat_vec(&inv, vt));
        }
        FiberCurve::new(path.grid.clone(), out)
    }
}

/// RK4 for `y' = A(t) y + f(t)` on a fixed grid, with coefficients given at
/// the nodes and segment midpoints. `backward` integrates from the last node.
pub(crate) fn linear_rk4(
    grid: &[f64],
    node_mats: &[Vec<f64>],
    mid_mats: &[Vec<f64>],
    forcing: Option<(&[Vec<f64>], &[Vec<f64>])>,
    y0: &[f64],
    backward: bool,
) -> Vec<Vec<f64>> {
    let dim = y0.len();
    let apply = |m: &[f64], y: &[f64], f: Option<&[f64]>| -> Vec<f64> {
        (0..dim)
            .map(|i| {
                let mut acc: f64 = (0..dim).map(|j| m[i * dim + j] * y[j]).sum();
                if let Some(f) = f {
                    acc += f[i];
                }
                acc
            })
            .collect()
    };
    let node_f = |k: usize| forcing.map(|(nf, _)| nf[k].as_slice());
    let mid_f = |k: usize| forcing.map(|(_, mf)| mf[k].as_slice());
    let last = grid.len() - 1;
    let mut out = vec![Vec::new(); grid.len()];
    let mut y = y0.to_vec();
    let order: Vec<usize> = if backward { (0..last).rev().collect() } else { (0..last).collect() };
    out[if backward { last } else { 0 }] = y.clone();
    for k in order {
        let (from, to) = if backward { (k + 1, k) } else { (k, k + 1) };
        let h = grid[to] - grid[from];
        let k1 = apply(&node_mats[from], &y, node_f(from));
        let y2: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = apply(&mid_mats[k], &y2, mid_f(k));
        let y3: Vec<f64> = (0..dim).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = apply(&mid_mats[k], &y3, mid_f(k));
        let y4: Vec<f64> = (0..dim).map(|i| y[i] + h * k3[i]).collect();
        let k4 = apply(&node_mats[to], &y4, node_f(to));
        y = (0..dim)
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        out[to] = y.clone();
    }
    out
}
