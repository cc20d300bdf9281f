//! Vertical/horizontal splitting along the anchor kernel.
//!
//! At each point `A_x = G_x + G_x^perp` with `G_x = ker #`. The O'Neill
//! tensors are
//!
//! ```text
//! T_a b = (D_{a^v} b^v)^h + (D_{a^v} b^h)^v
//! H_a b = (D_{a^h} b^v)^h + (D_{a^h} b^h)^v
//! ```
//!
//! Vertical vectors have zero anchor, so `D_{a^v}` is pointwise and `T` only
//! needs Gamma. `H` differentiates the vertical and horizontal parts of `b`
//! along `#a^h`; the parts are extended by the projector fields, whose
//! directional derivative is taken by central differences.

use crate::algebroid::AVector;
use crate::error::{Error, Result};
use crate::metric::{christoffel_from_jets, christoffel_kernel, inner, mat_vec, sectional_from, PointGeometry, RiemannianAlgebroid};
use crate::numeric::{invert, max_abs_diff, norm};
use crate::scalar_field::Jet;
use nalgebra::DMatrix;
use std::fmt::Write as _;

/// Relative singular-value threshold for the anchor rank.
pub const RANK_TOL: f64 = 1e-10;
/// Step, in chart units, for derivatives of the projector fields.
pub const PROJECTOR_STEP: f64 = 1e-5;
/// Tolerance for tangent vectors that must lie in the anchor image.
pub const IMAGE_TOL: f64 = 1e-9;

/// `A_x = ker # + (ker #)^perp` with g-orthonormal bases of both parts.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    pub x: Vec<f64>,
    /// Rank of the anchor at `x`.
    pub q: usize,
    pub vertical: Vec<Vec<f64>>,
    pub horizontal: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    /// Some singular value lies within a factor 10 of the rank threshold.
    pub rank_warning: bool,
    g: Vec<f64>,
}

impl SplitFrame {
    pub fn r(&self) -> usize {
        self.vertical.len() + self.horizontal.len()
    }

    /// Vertical vectors first, then horizontal ones.
    pub fn basis(&self) -> Vec<Vec<f64>> {
        self.vertical.iter().chain(&self.horizontal).cloned().collect()
    }

    fn project(&self, frame: &[Vec<f64>], u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for e in frame {
            let c = inner(&self.g, e, u);
            for (o, ei) in out.iter_mut().zip(e) {
                *o += c * ei;
            }
        }
        out
    }

    pub fn vertical_part(&self, u: &[f64]) -> Vec<f64> {
        self.project(&self.vertical, u)
    }

    pub fn horizontal_part(&self, u: &[f64]) -> Vec<f64> {
        self.project(&self.horizontal, u)
    }

    /// Components of `u` in [`Self::basis`].
    pub fn coordinates(&self, u: &[f64]) -> Vec<f64> {
        self.basis().iter().map(|e| inner(&self.g, e, u)).collect()
    }
}

fn gram_schmidt(g: &[f64], vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for _ in 0..2 {
            for e in &out {
                let c = inner(g, e, &v);
                for (vi, ei) in v.iter_mut().zip(e) {
                    *vi -= c * ei;
                }
            }
        }
        let len = inner(g, &v, &v).sqrt();
        out.push(v.into_iter().map(|c| c / len).collect());
    }
    out
}

/// Split of a fiber from the anchor matrix `b` (`r x n`) and metric `g`.
pub(crate) fn split_from(x: &[f64], n: usize, r: usize, b: &[f64], g: &[f64], ginv: &[f64]) -> SplitFrame {
    // # as a linear map R^r -> R^n is b^T; pad to a square-or-tall matrix so the SVD returns all of V
    let rows = n.max(r);
    let m = DMatrix::from_fn(rows, r, |i, s| if i < n { b[s * n + i] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_max = sigma.iter().copied().fold(0.0, f64::max);
    let threshold = RANK_TOL * sigma_max;
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));
    let mut kernel = Vec::new();
    let mut range = Vec::new();
    let mut rank_warning = false;
    for &k in &order {
        let row: Vec<f64> = (0..r).map(|s| v_t[(k, s)]).collect();
        if sigma_max > 0.0 && sigma[k] > threshold {
            range.push(row);
        } else {
            kernel.push(row);
        }
        if sigma_max > 0.0 && sigma[k] > 0.1 * threshold && sigma[k] < 10.0 * threshold {
            rank_warning = true;
        }
    }
    let q = range.len();
    let vertical = gram_schmidt(g, kernel);
    // the g-orthogonal complement of ker b^T is g^{-1} (range of b)
    let horizontal = gram_schmidt(g, range.iter().map(|u| mat_vec(ginv, u)).collect());
    let mut sorted: Vec<f64> = order.iter().map(|&k| sigma[k]).collect();
    sorted.truncate(n.min(r));
    SplitFrame {
        x: x.to_vec(),
        q,
        vertical,
        horizontal,
        singular_values: sorted,
        rank_warning,
        g: g.to_vec(),
    }
}

/// Pointwise geometry plus the split.
#[derive(Debug, Clone)]
pub struct Local {
    pub point: PointGeometry,
    pub frame: SplitFrame,
}

impl Local {
    /// `T(a, b)`.
    pub fn t(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let f = &self.frame;
        let av = f.vertical_part(a);
        let g1 = self.point.gamma(&av, &f.vertical_part(b));
        let g2 = self.point.gamma(&av, &f.horizontal_part(b));
        let h = f.horizontal_part(&g1);
        let v = f.vertical_part(&g2);
        h.iter().zip(v).map(|(p, q)| p + q).collect()
    }

    /// Mean curvature section `N = sum_i T_{b_i} b_i` over the vertical frame.
    pub fn mean_curvature(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.frame.r()];
        for e in &self.frame.vertical {
            for (o, c) in out.iter_mut().zip(self.t(e, e)) {
                *o += c;
            }
        }
        out
    }

    /// Trace of `u -> [a^v, u]` on the vertical space.
    pub fn trace_ad(&self, a: &[f64]) -> f64 {
        let av = self.frame.vertical_part(a);
        self.frame
            .vertical
            .iter()
            .map(|e| inner(&self.point.g, &self.point.bracket(&av, e), e))
            .sum()
    }

    /// Largest horizontal component of a bracket of two vertical frame vectors.
    pub fn vertical_closure_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for u in &self.frame.vertical {
            for v in &self.frame.vertical {
                let h = self.frame.horizontal_part(&self.point.bracket(u, v));
                worst = worst.max(norm(&h));
            }
        }
        worst
    }
}

/// Components of `T` and `H` in the split frame:
/// `T_{e_i} e_j = sum_k t[(i*r+j)*r+k] e_k`, same layout for `H`.
#[derive(Debug, Clone)]
pub struct OneillTensors {
    pub frame: SplitFrame,
    pub t: Vec<f64>,
    pub h: Vec<f64>,
}

impl OneillTensors {
    pub fn to_csv(&self) -> String {
        let r = self.frame.r();
        let mut out = String::from("tensor,i,j,k,value\n");
        for (name, data) in [("T", &self.t), ("H", &self.h)] {
            for i in 0..r {
                for j in 0..r {
                    for k in 0..r {
                        let _ = writeln!(out, "{name},{},{},{},{:.16e}", i + 1, j + 1, k + 1, data[(i * r + j) * r + k]);
                    }
                }
            }
        }
        out
    }
}

/// A tangent vector to the total space at some `a`, in `(x, mu)` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub dx: Vec<f64>,
    pub dmu: Vec<f64>,
}

impl TangentVector {
    pub fn new(dx: Vec<f64>, dmu: Vec<f64>) -> Self {
        TangentVector { dx, dmu }
    }
}

/// One residual of a named identity; `None` when it does not apply.
#[derive(Debug, Clone)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Divergence {
    pub trace_term: f64,
    pub mean_curvature_term: f64,
}

impl Divergence {
    pub fn total(&self) -> f64 {
        self.trace_term + self.mean_curvature_term
    }
}

impl RiemannianAlgebroid {
    pub fn split(&self, x: &[f64]) -> Result<SplitFrame> {
        let (n, r) = (self.n(), self.r());
        let b = self.chart.anchor_matrix(x)?;
        let g = self.metric.values(x)?;
        let ginv = invert(&g, r).ok_or_else(|| crate::metric::singular(x, 0.0))?;
        Ok(split_from(x, n, r, &b, &g, &ginv))
    }

    pub fn local(&self, x: &[f64]) -> Result<Local> {
        let point = self.point(x, false)?;
        let frame = split_from(x, point.n, point.r, &point.b, &point.g, &point.ginv);
        Ok(Local { point, frame })
    }

    /// `(d/dw P_v) u` by central differences along the base direction `w`.
    fn vertical_projector_derivative(&self, local: &Local, w: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let len = norm(w);
        if len == 0.0 {
            return Ok(vec![0.0; u.len()]);
        }
        let eps = PROJECTOR_STEP / len;
        let shifted = |sign: f64| -> Result<SplitFrame> {
            let y: Vec<f64> = local.frame.x.iter().zip(w).map(|(xi, wi)| xi + sign * eps * wi).collect();
            let f = self.split(&y)?;
            if f.q != local.frame.q {
                return Err(Error::Precondition(format!(
                    "anchor rank changes near {:?} ({} vs {})",
                    local.frame.x, local.frame.q, f.q
                )));
            }
            Ok(f)
        };
        let plus = shifted(1.0)?.vertical_part(u);
        let minus = shifted(-1.0)?.vertical_part(u);
        Ok(plus.iter().zip(minus).map(|(p, m)| (p - m) / (2.0 * eps)).collect())
    }

    /// `H(a, b)` at the point of `local`.
    pub fn oneill_h_at(&self, local: &Local, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let f = &local.frame;
        let p = &local.point;
        let ah = f.horizontal_part(a);
        let w = p.anchor(&ah);
        let dpv = self.vertical_projector_derivative(local, &w, b)?;
        // D_{a^h} (P_v b) and D_{a^h} (P_h b), with P_h = 1 - P_v
        let mut dv = p.gamma(&ah, &f.vertical_part(b));
        let mut dh = p.gamma(&ah, &f.horizontal_part(b));
        for k in 0..dv.len() {
            dv[k] += dpv[k];
            dh[k] -= dpv[k];
        }
        let h = f.horizontal_part(&dv);
        let v = f.vertical_part(&dh);
        Ok(h.iter().zip(v).map(|(x, y)| x + y).collect())
    }

    pub fn oneill_t(&self, x: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.chart.check_fiber(a)?;
        self.chart.check_fiber(b)?;
        Ok(self.local(x)?.t(a, b))
    }

    pub fn oneill_h(&self, x: &[f64], a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        self.chart.check_fiber(a)?;
        self.chart.check_fiber(b)?;
        let local = self.local(x)?;
        self.oneill_h_at(&local, a, b)
    }

    /// `T` and `H` on the split frame at `x`.
    pub fn oneill_tensors(&self, x: &[f64]) -> Result<OneillTensors> {
        let local = self.local(x)?;
        let basis = local.frame.basis();
        let r = basis.len();
        let mut t = vec![0.0; r * r * r];
        let mut h = vec![0.0; r * r * r];
        for i in 0..r {
            for j in 0..r {
                let tv = local.frame.coordinates(&local.t(&basis[i], &basis[j]));
                let hv = local.frame.coordinates(&self.oneill_h_at(&local, &basis[i], &basis[j])?);
                for k in 0..r {
                    t[(i * r + j) * r + k] = tv[k];
                    h[(i * r + j) * r + k] = hv[k];
                }
            }
        }
        Ok(OneillTensors {
            frame: local.frame,
            t,
            h,
        })
    }

    /// `[P_h a, P_h b]` at `x`, the horizontal parts extended by the projector field.
    pub fn horizontal_bracket(&self, local: &Local, a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let f = &local.frame;
        let p = &local.point;
        let (ah, bh) = (f.horizontal_part(a), f.horizontal_part(b));
        let mut out = p.bracket(&ah, &bh);
        // #(a^h)(P_h b) - #(b^h)(P_h a), with d P_h = -d P_v
        let db = self.vertical_projector_derivative(local, &p.anchor(&ah), b)?;
        let da = self.vertical_projector_derivative(local, &p.anchor(&bh), a)?;
        for k in 0..out.len() {
            out[k] += -db[k] + da[k];
        }
        Ok(out)
    }

    /// Residuals of the algebraic identities of `T` and `H`, and of
    /// `H_{a^h} b^h = [a^h, b^h]^v / 2` and `(D_u v)^h = T_u v` for vertical
    /// `u, v`, over all frame vectors.
    pub fn oneill_identities(&self, x: &[f64]) -> Result<Vec<IdentityResidual>> {
        let local = self.local(x)?;
        let f = &local.frame;
        let p = &local.point;
        let basis = f.basis();
        let r = basis.len();
        let mut t = Vec::with_capacity(r * r);
        let mut h = Vec::with_capacity(r * r);
        for a in &basis {
            for b in &basis {
                t.push(local.t(a, b));
                h.push(self.oneill_h_at(&local, a, b)?);
            }
        }
        let is_v = |i: usize| i < f.vertical.len();
        let gi = |u: &[f64], v: &[f64]| inner(&p.g, u, v);
        let mut worst = [0.0f64; 10];
        let mut bump = |k: usize, v: f64| worst[k] = worst[k].max(v.abs());
        for i in 0..r {
            for j in 0..r {
                let tij = &t[i * r + j];
                let hij = &h[i * r + j];
                if !is_v(i) {
                    bump(0, norm(tij));
                } else {
                    let d = p.gamma(&basis[i], &basis[j]);
                    let expect = if is_v(j) { f.horizontal_part(&d) } else { f.vertical_part(&d) };
                    bump(1, max_abs_diff(tij, &expect));
                }
                if is_v(i) && is_v(j) {
                    bump(2, max_abs_diff(tij, &t[j * r + i]));
                }
                if is_v(i) {
                    bump(4, norm(hij));
                }
                if !is_v(i) && !is_v(j) {
                    bump(6, max_abs_diff(hij, &h[j * r + i].iter().map(|c| -c).collect::<Vec<_>>()));
                    let br = self.horizontal_bracket(&local, &basis[i], &basis[j])?;
                    let half: Vec<f64> = f.vertical_part(&br).iter().map(|c| 0.5 * c).collect();
                    bump(8, max_abs_diff(hij, &half));
                }
                if !is_v(i) {
                    // H_{a^h} b^v = (D_{a^h} b^v)^h and H_{a^h} b^h = (D_{a^h} b^h)^v
                    let ah = &basis[i];
                    let dpv = self.vertical_projector_derivative(&local, &p.anchor(ah), &basis[j])?;
                    let mut d = p.gamma(ah, &basis[j]);
                    let expect = if is_v(j) {
                        for k in 0..r {
                            d[k] += dpv[k];
                        }
                        f.horizontal_part(&d)
                    } else {
                        for k in 0..r {
                            d[k] -= dpv[k];
                        }
                        f.vertical_part(&d)
                    };
                    bump(5, max_abs_diff(hij, &expect));
                }
                if is_v(i) && is_v(j) {
                    let d = p.gamma(&basis[i], &basis[j]);
                    let rebuilt: Vec<f64> = f.vertical_part(&d).iter().zip(tij).map(|(a, b)| a + b).collect();
                    bump(9, max_abs_diff(&d, &rebuilt));
                }
                for k in 0..r {
                    if is_v(i) && is_v(j) && !is_v(k) {
                        bump(3, gi(tij, &basis[k]) + gi(&t[i * r + k], &basis[j]));
                    }
                    if !is_v(i) && !is_v(j) && is_v(k) {
                        bump(7, gi(hij, &basis[k]) + gi(&h[i * r + k], &basis[j]));
                    }
                }
            }
        }
        let names = [
            "t_horizontal_slot_vanishes",
            "t_matches_projected_derivative",
            "t_symmetric_on_vertical",
            "t_skew_adjoint",
            "h_vertical_slot_vanishes",
            "h_matches_projected_derivative",
            "h_antisymmetric_on_horizontal",
            "h_skew_adjoint",
            "h_half_vertical_bracket",
            "vertical_derivative_decomposition",
        ];
        Ok(names
            .iter()
            .zip(worst)
            .map(|(name, w)| IdentityResidual {
                name,
                residual: Some(w),
            })
            .collect())
    }

    /// `div X_E(a) = Tr ad_{a^v} + <a^h, N>` with respect to the Sasaki metric.
    pub fn divergence_xe(&self, v: &AVector) -> Result<Divergence> {
        self.chart.check_fiber(&v.mu)?;
        let local = self.local(&v.x)?;
        let nvec = local.mean_curvature();
        let ah = local.frame.horizontal_part(&v.mu);
        Ok(Divergence {
            trace_term: local.trace_ad(&v.mu),
            mean_curvature_term: inner(&local.point.g, &ah, &nvec),
        })
    }

    /// Horizontal `alpha` with `#(alpha) = u`.
    pub fn horizontal_lift(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let local = self.local(x)?;
        horizontal_lift_at(&local, u)
    }

    /// `<u, v>_L` for `u, v` tangent to the leaf through `x`.
    pub fn leaf_metric(&self, x: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        let local = self.local(x)?;
        let a = horizontal_lift_at(&local, u)?;
        let b = horizontal_lift_at(&local, v)?;
        Ok(inner(&local.point.g, &a, &b))
    }

    /// `K(Z) = Z_mu + Gamma(alpha, mu)` with `alpha` the horizontal lift of `dp(Z)`.
    pub fn connector(&self, a: &AVector, z: &TangentVector) -> Result<Vec<f64>> {
        self.chart.check_fiber(&a.mu)?;
        self.chart.check_fiber(&z.dmu)?;
        let local = self.local(&a.x)?;
        let alpha = horizontal_lift_at(&local, &z.dx)?;
        let g = local.point.gamma(&alpha, &a.mu);
        Ok(z.dmu.iter().zip(g).map(|(p, q)| p + q).collect())
    }

    /// The tangent vector at `a` with `dp = u` and `K = 0`.
    pub fn horizontal_tangent(&self, a: &AVector, u: &[f64]) -> Result<TangentVector> {
        let local = self.local(&a.x)?;
        let alpha = horizontal_lift_at(&local, u)?;
        let dmu = local.point.gamma(&alpha, &a.mu).into_iter().map(|c| -c).collect();
        Ok(TangentVector::new(u.to_vec(), dmu))
    }

    fn require_transitive_or_lie(&self, local: &Local) -> Result<()> {
        let q = local.frame.q;
        if q == self.n() || (q == 0 && self.chart.has_zero_anchor()) {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "needs a transitive chart or a Lie algebra (anchor rank {q}, n = {})",
                self.n()
            )))
        }
    }

    /// Polarized Sasaki metric `<dp Z1, dp Z2>_L + <K Z1, K Z2>`.
    pub fn sasaki_metric(&self, a: &AVector, z1: &TangentVector, z2: &TangentVector) -> Result<f64> {
        let local = self.local(&a.x)?;
        self.require_transitive_or_lie(&local)?;
        let k1 = self.connector(a, z1)?;
        let k2 = self.connector(a, z2)?;
        let l1 = horizontal_lift_at(&local, &z1.dx)?;
        let l2 = horizontal_lift_at(&local, &z2.dx)?;
        Ok(inner(&local.point.g, &l1, &l2) + inner(&local.point.g, &k1, &k2))
    }

    /// Geometry of the induced leaf metric `(b^T g^{-1} b)^{-1}` as a
    /// classical Riemannian metric on the chart. Transitive charts only.
    pub fn leaf_geometry(&self, x: &[f64]) -> Result<PointGeometry> {
        let (n, r) = (self.n(), self.r());
        let sj = self.chart.structure_jets(x, 2)?;
        let g = self.metric.jets(x, 2)?;
        let ginv = invert(&g, r).ok_or_else(|| crate::metric::singular(x, 0.0))?;
        let mut m = vec![Jet::constant(0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = Jet::constant(0.0);
                for s in 0..r {
                    for t in 0..r {
                        let (bi, bj) = (&sj.b[s * n + i], &sj.b[t * n + j]);
                        if bi.is_constant() && bi.value() == 0.0 || bj.is_constant() && bj.value() == 0.0 {
                            continue;
                        }
                        acc = acc + bi * &(&ginv[s * r + t] * bj);
                    }
                }
                m[i * n + j] = acc;
            }
        }
        let mv: Vec<f64> = m.iter().map(Jet::value).collect();
        if !(crate::metric::smallest_eigenvalue(&mv, n) > crate::metric::MIN_EIGENVALUE) {
            return Err(Error::Unsupported("leaf metric needs a transitive chart".into()));
        }
        let gl = invert(&m, n).ok_or_else(|| Error::Unsupported("leaf metric needs a transitive chart".into()))?;
        let ident: Vec<Jet> = (0..n * n).map(|k| Jet::constant(if k / n == k % n { 1.0 } else { 0.0 })).collect();
        let zero_c = vec![Jet::constant(0.0); n * n * n];
        let christoffel = christoffel_from_jets(n, n, &ident, &zero_c, &gl, x)?;
        let glv: Vec<f64> = gl.iter().map(Jet::value).collect();
        let glinv = invert(&glv, n).ok_or_else(|| crate::metric::singular(x, 0.0))?;
        Ok(PointGeometry {
            x: x.to_vec(),
            n,
            r: n,
            b: ident.iter().map(Jet::value).collect(),
            c: vec![0.0; n * n * n],
            g: glv,
            ginv: glinv,
            christoffel,
        })
    }

    /// Geodesic of the leaf metric from `x` with velocity `u` (classical RK4 in `(x, x')`).
    pub fn leaf_geodesic(&self, x: &[f64], u: &[f64], t_span: (f64, f64), h: f64) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let grid = crate::numeric::uniform_grid(t_span.0, t_span.1, h);
        let mut rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
            let p = self.leaf_geometry(&y[..n])?;
            let acc = p.gamma(&y[n..], &y[n..]);
            Ok(y[n..].iter().copied().chain(acc.into_iter().map(|c| -c)).collect())
        };
        let mut y = [x, u].concat();
        let mut out = vec![x.to_vec()];
        for k in 0..grid.len() - 1 {
            let k1 = rhs(grid[k], &y)?;
            y = crate::numeric::rk4_step(&mut rhs, grid[k], &y, grid[k + 1] - grid[k], k1)?;
            out.push(y[..n].to_vec());
        }
        Ok(out)
    }

    /// Residuals of the three curvature identities of the split on frame pairs:
    /// vertical pairs, mixed pairs and horizontal pairs.
    pub fn oneill_curvature_check(&self, x: &[f64]) -> Result<Vec<IdentityResidual>> {
        let local = self.local(x)?;
        self.require_transitive_or_lie(&local)?;
        let full = self.point(x, true)?;
        let curv = full.curvature();
        let f = &local.frame;
        let k = |a: &[f64], b: &[f64]| sectional_from(&full, &curv, a, b);
        let gi = |u: &[f64], v: &[f64]| inner(&full.g, u, v);

        let vertical = if f.vertical.len() >= 2 {
            let hat = self.vertical_algebra_geometry(&local);
            let hat_curv = hat.curvature();
            let mut worst: f64 = 0.0;
            for i in 0..f.vertical.len() {
                for j in i + 1..f.vertical.len() {
                    let (a, b) = (&f.vertical[i], &f.vertical[j]);
                    let mut ei = vec![0.0; f.vertical.len()];
                    let mut ej = ei.clone();
                    ei[i] = 1.0;
                    ej[j] = 1.0;
                    let k_hat = sectional_from(&hat, &hat_curv, &ei, &ej)?;
                    let tab = local.t(a, b);
                    let rhs = k_hat + gi(&tab, &tab) - gi(&local.t(a, a), &local.t(b, b));
                    worst = worst.max((k(a, b)? - rhs).abs());
                }
            }
            Some(worst)
        } else {
            None
        };

        let mixed = if !f.vertical.is_empty() && !f.horizontal.is_empty() {
            let mut worst: f64 = 0.0;
            for s1 in &f.horizontal {
                for alpha in &f.vertical {
                    let dt = self.t_derivative(&local, s1, alpha)?;
                    let tas = local.t(alpha, s1);
                    let hsa = self.oneill_h_at(&local, s1, alpha)?;
                    let rhs = gi(&dt, s1) - gi(&tas, &tas) + gi(&hsa, &hsa);
                    worst = worst.max((k(s1, alpha)? - rhs).abs());
                }
            }
            Some(worst)
        } else {
            None
        };

        let horizontal = if f.horizontal.len() >= 2 {
            let leaf = self.leaf_geometry(x)?;
            let leaf_curv = leaf.curvature();
            let mut worst: f64 = 0.0;
            for i in 0..f.horizontal.len() {
                for j in i + 1..f.horizontal.len() {
                    let (s1, s2) = (&f.horizontal[i], &f.horizontal[j]);
                    let (u, v) = (full.anchor(s1), full.anchor(s2));
                    let k_tilde = sectional_from(&leaf, &leaf_curv, &u, &v)?;
                    let hs = self.oneill_h_at(&local, s1, s2)?;
                    worst = worst.max((k(s1, s2)? - (k_tilde - 3.0 * gi(&hs, &hs))).abs());
                }
            }
            Some(worst)
        } else {
            None
        };

        Ok(vec![
            IdentityResidual {
                name: "vertical_pairs",
                residual: vertical,
            },
            IdentityResidual {
                name: "mixed_pairs",
                residual: mixed,
            },
            IdentityResidual {
                name: "horizontal_pairs",
                residual: horizontal,
            },
        ])
    }

    /// `(D_X T)_alpha alpha` for a constant extension of `alpha`.
    fn t_derivative(&self, local: &Local, xvec: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
        let p = &local.point;
        let w = p.anchor(xvec);
        let len = norm(&w);
        let taa = local.t(alpha, alpha);
        let mut along = vec![0.0; taa.len()];
        if len > 0.0 {
            let eps = PROJECTOR_STEP / len;
            let at = |sign: f64| -> Result<Vec<f64>> {
                let y: Vec<f64> = p.x.iter().zip(&w).map(|(xi, wi)| xi + sign * eps * wi).collect();
                Ok(self.local(&y)?.t(alpha, alpha))
            };
            let (plus, minus) = (at(1.0)?, at(-1.0)?);
            for k in 0..along.len() {
                along[k] = (plus[k] - minus[k]) / (2.0 * eps);
            }
        }
        // D_X (T(alpha, alpha)) - T(D_X alpha, alpha) - T(alpha, D_X alpha)
        let dx_t = p.gamma(xvec, &taa);
        let dx_alpha = p.gamma(xvec, alpha);
        let t1 = local.t(&dx_alpha, alpha);
        let t2 = local.t(alpha, &dx_alpha);
        Ok((0..taa.len()).map(|k| along[k] + dx_t[k] - t1[k] - t2[k]).collect())
    }

    /// The vertical Lie algebra with the restricted metric, written in the
    /// orthonormal vertical frame.
    fn vertical_algebra_geometry(&self, local: &Local) -> PointGeometry {
        let f = &local.frame;
        let m = f.vertical.len();
        let mut c = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                let br = local.point.bracket(&f.vertical[i], &f.vertical[j]);
                for k in 0..m {
                    c[(i * m + j) * m + k] = inner(&local.point.g, &br, &f.vertical[k]);
                }
            }
        }
        let ident: Vec<f64> = (0..m * m).map(|k| if k / m == k % m { 1.0 } else { 0.0 }).collect();
        let zeros_b = vec![0.0; m];
        let dg = vec![0.0; m * m];
        let gamma = christoffel_kernel(1, m, &zeros_b, &c, &ident, &dg, &ident);
        PointGeometry {
            x: vec![0.0],
            n: 1,
            r: m,
            b: zeros_b,
            c,
            g: ident.clone(),
            ginv: ident,
            christoffel: crate::metric::Christoffel {
                r: m,
                n: 1,
                gamma,
                dgamma: Some(vec![0.0; m * m * m]),
            },
        }
    }

    /// Divergence of the Hamiltonian field with respect to the Sasaki volume,
    /// by central differences of `rho X` in `(x, mu)` coordinates, where
    /// `rho = sqrt(det g_L det g)`. Transitive charts and Lie algebras only.
    pub fn divergence_fd(&self, v: &AVector, step: f64) -> Result<f64> {
        let (n, r) = (self.n(), self.r());
        let local = self.local(&v.x)?;
        self.require_transitive_or_lie(&local)?;
        let lie = local.frame.q == 0;
        let density = |x: &[f64]| -> Result<f64> {
            let g = self.metric.values(x)?;
            let dg = DMatrix::from_row_slice(r, r, &g).determinant();
            if lie {
                return Ok(dg.sqrt());
            }
            let b = self.chart.anchor_matrix(x)?;
            let ginv = invert(&g, r).ok_or_else(|| crate::metric::singular(x, 0.0))?;
            let m = DMatrix::from_fn(n, n, |i, j| {
                let mut acc = 0.0;
                for s in 0..r {
                    for t in 0..r {
                        acc += b[s * n + i] * ginv[s * r + t] * b[t * n + j];
                    }
                }
                acc
            });
            Ok((dg / m.determinant()).sqrt())
        };
        let rho0 = density(&v.x)?;
        let mut div = 0.0;
        if !lie {
            for i in 0..n {
                let mut flux = [0.0; 2];
                for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                    let mut y = v.clone();
                    y.x[i] += sign * step;
                    let (dx, _) = self.hamiltonian_field(&y)?;
                    flux[slot] = density(&y.x)? * dx[i];
                }
                div += (flux[0] - flux[1]) / (2.0 * step) / rho0;
            }
        }
        for j in 0..r {
            let mut vals = [0.0; 2];
            for (slot, sign) in [(0, 1.0), (1, -1.0)] {
                let mut y = v.clone();
                y.mu[j] += sign * step;
                vals[slot] = self.hamiltonian_field(&y)?.1[j];
            }
            div += (vals[0] - vals[1]) / (2.0 * step);
        }
        Ok(div)
    }
}

fn horizontal_lift_at(local: &Local, u: &[f64]) -> Result<Vec<f64>> {
    let f = &local.frame;
    let p = &local.point;
    if u.len() != p.n {
        return Err(Error::Dimension(format!("tangent vector has {} entries, expected {}", u.len(), p.n)));
    }
    let q = f.horizontal.len();
    if q == 0 {
        let res = norm(u);
        if res > IMAGE_TOL {
            return Err(Error::NotInAnchorImage(res));
        }
        return Ok(vec![0.0; p.r]);
    }
    // least squares for sum_k c_k #(h_k) = u over the horizontal frame
    let images: Vec<Vec<f64>> = f.horizontal.iter().map(|h| p.anchor(h)).collect();
    let a = DMatrix::from_fn(p.n, q, |i, k| images[k][i]);
    let rhs = nalgebra::DVector::from_column_slice(u);
    let coeffs = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let back = &a * &coeffs;
    let res = (back - rhs).norm();
    if res > IMAGE_TOL * (1.0 + norm(u)) {
        return Err(Error::NotInAnchorImage(res));
    }
    let mut alpha = vec![0.0; p.r];
    for (k, h) in f.horizontal.iter().enumerate() {
        for (o, hi) in alpha.iter_mut().zip(h) {
            *o += coeffs[k] * hi;
        }
    }
    Ok(alpha)
}
