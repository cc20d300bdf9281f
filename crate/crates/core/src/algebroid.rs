//! Lie algebroids over a single chart, given by structure functions.
//!
//! With respect to a local basis `a_1..a_r` of sections the anchor is
//! `#a_s = sum_i b^{si} d/dx_i` and the bracket is `[a_s, a_t] = sum_u C_st^u a_u`.
//! A Lie algebra is the special case `n = 1`, `b = 0`, constant `C`.

use crate::error::{Error, Result};
use crate::numeric::sample_box;
use crate::scalar_field::{Jet, ScalarField};
use std::fmt::Write as _;

/// Antisymmetry is structural, but the loader still reports anything above this.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;
/// Validation passes iff every residual is below this.
pub const VALIDATION_TOL: f64 = 1e-9;
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Debug, Clone)]
pub struct AlgebroidChart {
    n: usize,
    r: usize,
    domain: Vec<(f64, f64)>,
    anchor: Vec<ScalarField>,
    bracket: Vec<ScalarField>,
}

/// One upper-triangle bracket coefficient, 0-based indices with `s < t`.
#[derive(Debug, Clone)]
pub struct BracketEntry {
    pub s: usize,
    pub t: usize,
    pub u: usize,
    pub field: ScalarField,
}

impl BracketEntry {
    pub fn new(s: usize, t: usize, u: usize, field: ScalarField) -> Self {
        BracketEntry { s, t, u, field }
    }
}

/// A point of `A`: base point and fiber coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AVector {
    pub x: Vec<f64>,
    pub mu: Vec<f64>,
}

impl AVector {
    pub fn new(x: Vec<f64>, mu: Vec<f64>) -> Self {
        AVector { x, mu }
    }
}

/// A section `x -> sum_s f_s(x) a_s`.
#[derive(Debug, Clone)]
pub struct SectionField {
    pub components: Vec<ScalarField>,
}

impl SectionField {
    pub fn new(components: Vec<ScalarField>) -> Self {
        SectionField { components }
    }

    /// The constant section with fiber coordinates `mu`.
    pub fn constant(mu: &[f64], n: usize) -> Self {
        SectionField {
            components: mu.iter().map(|&m| ScalarField::constant(m, n)).collect(),
        }
    }

    pub fn basis(s: usize, r: usize, n: usize) -> Self {
        let mut mu = vec![0.0; r];
        mu[s] = 1.0;
        Self::constant(&mu, n)
    }

    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.components
            .iter()
            .map(|c| c.value(x).map_err(Error::from))
            .collect()
    }

    pub(crate) fn jets(&self, x: &[f64], order: u8) -> Result<Vec<Jet>> {
        self.components
            .iter()
            .map(|c| c.jet(x, order).map_err(Error::from))
            .collect()
    }
}

/// Anchor and bracket coefficients at a point, each with its gradient.
#[derive(Debug, Clone)]
pub(crate) struct StructureJets {
    pub b: Vec<Jet>,
    pub c: Vec<Jet>,
}

impl AlgebroidChart {
    /// `anchor` holds `r` rows of `n` entries. Bracket entries are given only
    /// for `s < t`; the lower triangle is filled by antisymmetry.
    pub fn new(
        n: usize,
        r: usize,
        domain: Vec<(f64, f64)>,
        anchor: Vec<Vec<ScalarField>>,
        entries: Vec<BracketEntry>,
    ) -> Result<Self> {
        if n == 0 || r == 0 {
            return Err(Error::Dimension("n and r must be at least 1".into()));
        }
        if domain.len() != n {
            return Err(Error::Dimension(format!(
                "domain has {} intervals, expected {n}",
                domain.len()
            )));
        }
        for (i, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Structure(format!("bad domain interval for x{}", i + 1)));
            }
        }
        if anchor.len() != r || anchor.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("anchor must be {r} rows of {n} entries")));
        }
        let mut flat_anchor = Vec::with_capacity(r * n);
        for row in anchor {
            for f in row {
                check_arity(&f, n)?;
                flat_anchor.push(f);
            }
        }
        let mut bracket = vec![ScalarField::zero(n); r * r * r];
        let mut seen = vec![false; r * r * r];
        for e in entries {
            if e.s >= r || e.t >= r || e.u >= r {
                return Err(Error::Structure(format!(
                    "bracket index ({}, {}, {}) out of range for r = {r}",
                    e.s + 1,
                    e.t + 1,
                    e.u + 1
                )));
            }
            if e.s >= e.t {
                return Err(Error::Structure(format!(
                    "bracket entries need s < t, got ({}, {})",
                    e.s + 1,
                    e.t + 1
                )));
            }
            check_arity(&e.field, n)?;
            let k = (e.s * r + e.t) * r + e.u;
            if seen[k] {
                return Err(Error::Structure(format!(
                    "duplicate bracket entry ({}, {}, {})",
                    e.s + 1,
                    e.t + 1,
                    e.u + 1
                )));
            }
            seen[k] = true;
            bracket[(e.t * r + e.s) * r + e.u] = e.field.negated();
            bracket[k] = e.field;
        }
        Ok(AlgebroidChart {
            n,
            r,
            domain,
            anchor: flat_anchor,
            bracket,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    /// `b^{si}`.
    pub fn anchor_field(&self, s: usize, i: usize) -> &ScalarField {
        &self.anchor[s * self.n + i]
    }

    /// `C_st^u`.
    pub fn bracket_field(&self, s: usize, t: usize, u: usize) -> &ScalarField {
        &self.bracket[(s * self.r + t) * self.r + u]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.n && x.iter().zip(&self.domain).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("point has {} coordinates, expected {}", x.len(), self.n)));
        }
        if !self.contains(x) {
            return Err(Error::OutsideDomain(x.to_vec()));
        }
        Ok(())
    }

    pub(crate) fn check_fiber(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.r {
            return Err(Error::Dimension(format!("fiber vector has {} entries, expected {}", v.len(), self.r)));
        }
        Ok(())
    }

    /// True when the anchor vanishes identically (the chart encodes a Lie algebra).
    pub fn has_zero_anchor(&self) -> bool {
        self.anchor.iter().all(|f| f.as_constant() == Some(0.0))
    }

    /// Anchor matrix `b^{si}` at `x`, row-major `r x n`.
    pub fn anchor_matrix(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.anchor.iter().map(|f| f.value(x).map_err(Error::from)).collect()
    }

    /// Bracket coefficients at `x`, indexed `(s*r + t)*r + u`.
    pub fn bracket_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.bracket.iter().map(|f| f.value(x).map_err(Error::from)).collect()
    }

    pub(crate) fn structure_jets(&self, x: &[f64], order: u8) -> Result<StructureJets> {
        let b = self
            .anchor
            .iter()
            .map(|f| f.jet(x, order).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        let c = self
            .bracket
            .iter()
            .map(|f| f.jet(x, order).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(StructureJets { b, c })
    }

    /// `#(v) = sum_s mu_s b^{s.}(x)`.
    pub fn anchor_apply(&self, v: &AVector) -> Result<Vec<f64>> {
        self.check_fiber(&v.mu)?;
        let b = self.anchor_matrix(&v.x)?;
        Ok(apply_anchor(&b, &v.mu, self.n))
    }

    /// Fiber coordinates of `[f, g]` at `x`.
    pub fn bracket_sections(&self, f: &SectionField, g: &SectionField, x: &[f64]) -> Result<Vec<f64>> {
        let (n, r) = (self.n, self.r);
        if f.components.len() != r || g.components.len() != r {
            return Err(Error::Dimension(format!("sections need {r} components")));
        }
        let fj = f.jets(x, 1)?;
        let gj = g.jets(x, 1)?;
        let fv: Vec<f64> = fj.iter().map(Jet::value).collect();
        let gv: Vec<f64> = gj.iter().map(Jet::value).collect();
        let b = self.anchor_matrix(x)?;
        let c = self.bracket_values(x)?;
        let fx = apply_anchor(&b, &fv, n);
        let gx = apply_anchor(&b, &gv, n);
        let mut out = vec![0.0; r];
        for (u, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for s in 0..r {
                for t in 0..r {
                    acc += fv[s] * gv[t] * c[(s * r + t) * r + u];
                }
            }
            for i in 0..n {
                acc += fx[i] * gj[u].d(i) - gx[i] * fj[u].d(i);
            }
            *o = acc;
        }
        Ok(out)
    }

    /// Samples the axioms at `samples` Halton points of the domain box.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<ValidationReport> {
        let samples = samples.max(1);
        let points = sample_box(&self.domain, samples, seed);
        let mut report = ValidationReport {
            samples,
            tolerance: VALIDATION_TOL,
            checks: vec![
                AxiomCheck::new(Axiom::Antisymmetry),
                AxiomCheck::new(Axiom::AnchorMorphism),
                AxiomCheck::new(Axiom::Jacobi),
            ],
        };
        for x in &points {
            let res = self.axiom_residuals(x)?;
            for (check, (value, indices)) in report.checks.iter_mut().zip(res) {
                if value > check.max_residual || check.worst_point.is_empty() {
                    check.max_residual = value;
                    check.worst_point = x.clone();
                    check.indices = indices;
                }
            }
        }
        Ok(report)
    }

    /// Worst residual per axiom at `x` with the 1-based indices where it occurs.
    fn axiom_residuals(&self, x: &[f64]) -> Result<[(f64, Vec<usize>); 3]> {
        let (n, r) = (self.n, self.r);
        let sj = self.structure_jets(x, 1)?;
        let b = |s: usize, i: usize| &sj.b[s * n + i];
        let c = |s: usize, t: usize, u: usize| &sj.c[(s * r + t) * r + u];
        // derivative of C_st^v along #a_w
        let along = |w: usize, s: usize, t: usize, v: usize| -> f64 {
            (0..n).map(|m| b(w, m).value() * c(s, t, v).d(m)).sum()
        };

        let mut anti = (0.0, Vec::new());
        for s in 0..r {
            for t in 0..r {
                for u in 0..r {
                    let v = (c(s, t, u).value() + c(t, s, u).value()).abs();
                    if v > anti.0 || anti.1.is_empty() {
                        anti = (v, vec![s + 1, t + 1, u + 1]);
                    }
                }
            }
        }

        let mut morph = (0.0, Vec::new());
        for s in 0..r {
            for t in 0..r {
                for k in 0..n {
                    let lhs: f64 = (0..r).map(|u| c(s, t, u).value() * b(u, k).value()).sum();
                    let rhs: f64 = (0..n)
                        .map(|m| b(s, m).value() * b(t, k).d(m) - b(t, m).value() * b(s, k).d(m))
                        .sum();
                    let v = (lhs - rhs).abs();
                    if v > morph.0 || morph.1.is_empty() {
                        morph = (v, vec![s + 1, t + 1, k + 1]);
                    }
                }
            }
        }

        // [[a_s,a_t],a_u] = sum_m C_st^m [a_m, a_u] - #a_u(C_st^v) a_v, summed cyclically
        let mut jac = (0.0, Vec::new());
        for s in 0..r {
            for t in s + 1..r {
                for u in t + 1..r {
                    for v in 0..r {
                        let mut total = 0.0;
                        for (p, q, w) in [(s, t, u), (t, u, s), (u, s, t)] {
                            let quad: f64 = (0..r).map(|m| c(p, q, m).value() * c(m, w, v).value()).sum();
                            total += quad - along(w, p, q, v);
                        }
                        let val = total.abs();
                        if val > jac.0 || jac.1.is_empty() {
                            jac = (val, vec![s + 1, t + 1, u + 1, v + 1]);
                        }
                    }
                }
            }
        }
        Ok([anti, morph, jac])
    }
}

fn check_arity(f: &ScalarField, n: usize) -> Result<()> {
    if f.arity() != n {
        return Err(Error::Dimension(format!(
            "field `{f}` is defined over {} variables, chart has {n}",
            f.arity()
        )));
    }
    Ok(())
}

/// `t_i = sum_s mu_s b^{si}` for a row-major `r x n` anchor matrix.
pub(crate) fn apply_anchor(b: &[f64], mu: &[f64], n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n];
    for (s, m) in mu.iter().enumerate() {
        if *m == 0.0 {
            continue;
        }
        for (i, ti) in t.iter_mut().enumerate() {
            *ti += m * b[s * n + i];
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Antisymmetry,
    AnchorMorphism,
    Jacobi,
}

impl Axiom {
    pub fn name(self) -> &'static str {
        match self {
            Axiom::Antisymmetry => "antisymmetry",
            Axiom::AnchorMorphism => "anchor_morphism",
            Axiom::Jacobi => "jacobi",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AxiomCheck {
    pub axiom: Axiom,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    /// 1-based indices of the worst component: `(s,t,u)` for antisymmetry,
    /// `(s,t,k)` for the anchor morphism, `(s,t,u,v)` for the Jacobiator.
    /// Empty when the axiom has no components (e.g. Jacobi with r < 3).
    pub indices: Vec<usize>,
}

impl AxiomCheck {
    fn new(axiom: Axiom) -> Self {
        AxiomCheck {
            axiom,
            max_residual: 0.0,
            worst_point: Vec::new(),
            indices: Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub samples: usize,
    pub tolerance: f64,
    pub checks: Vec<AxiomCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.max_residual < self.tolerance)
    }

    pub fn check(&self, axiom: Axiom) -> &AxiomCheck {
        self.checks.iter().find(|c| c.axiom == axiom).expect("all axioms are checked")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axiom,max_residual,tolerance,pass,indices,worst_point\n");
        for c in &self.checks {
            let idx: Vec<String> = c.indices.iter().map(|i| i.to_string()).collect();
            let pt: Vec<String> = c.worst_point.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(
                out,
                "{},{:.16e},{:.16e},{},{},{}",
                c.axiom.name(),
                c.max_residual,
                self.tolerance,
                c.max_residual < self.tolerance,
                idx.join(" "),
                pt.join(" ")
            );
        }
        out
    }
}
