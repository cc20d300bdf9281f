//! Command-line front end.
//!
//! Every verb writes `<verb>.csv` and `report.txt` (one `key=value` per line)
//! into `--out`. Exit codes: 0 when every check passes, 1 when a check fails
//! or an integration leaves the chart, 2 on bad input.

use crate::algebroid::{AVector, Axiom};
use crate::catalog;
use crate::chartfile;
use crate::error::{Error, Result};
use crate::metric::{inner, RiemannianAlgebroid};
use crate::numeric::sample_box;
use crate::oneill::IdentityResidual;
use crate::paths::{FiberCurve, APATH_TOL, DEFAULT_STEP};
use crate::variations::{VariationGrid, TRANSVERSALITY_TOL};
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "algebroid", version, about = "Geometry of Riemannian Lie algebroids on a chart")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Chart file to load.
    #[arg(long, conflicts_with = "catalog")]
    chart: Option<PathBuf>,
    /// Built-in catalog entry.
    #[arg(long)]
    catalog: Option<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    /// Overrides the tolerance of every check.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct Start {
    /// Base point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<f64>,
    /// Fiber vector, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Vec<f64>,
    /// End time.
    #[arg(long, default_value_t = 1.0)]
    t1: f64,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Check the algebroid axioms at sampled points.
    Validate(Common),
    /// Integrate a geodesic.
    Geodesic {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
    },
    /// Time-one exponential map.
    Exp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
    },
    /// Parallel transport of `--s` along the geodesic.
    Transport {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s: Vec<f64>,
    },
    /// Jacobi field along the geodesic.
    Jacobi {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        /// Initial value.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        beta: Vec<f64>,
        /// Initial covariant derivative.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        dbeta: Vec<f64>,
    },
    /// Curvature tensor at a point, and optionally a sectional curvature.
    Curvature {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b: Vec<f64>,
        /// Expected sectional curvature.
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<f64>,
    },
    /// O'Neill tensors and their identities at a point.
    Oneill {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
    },
    /// Divergence of the Hamiltonian field at sampled points.
    Divergence {
        #[command(flatten)]
        common: Common,
        /// Fiber sampling box half-width.
        #[arg(long, default_value_t = 1.0)]
        mu_scale: f64,
    },
    /// Hamiltonian field against the geodesic system at sampled points.
    Hamcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.0)]
        mu_scale: f64,
    },
    /// Transverse variation checks on a geodesic pencil or a grid file.
    VariationCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        start: Start,
        /// Pencil direction.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        u: Vec<f64>,
        /// Variation grid CSV with beta columns; replaces the pencil.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-3)]
        eps_step: f64,
    },
    /// List the catalog, or write `--catalog NAME` as a chart file.
    Catalog {
        #[arg(long)]
        catalog: Option<String>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

struct Check {
    name: String,
    residual: Option<f64>,
    tolerance: f64,
}

impl Check {
    fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            residual: Some(residual),
            tolerance,
        }
    }

    fn pass(&self) -> bool {
        self.residual.is_none_or(|r| r <= self.tolerance)
    }
}

struct Outcome {
    csv: String,
    checks: Vec<Check>,
    values: Vec<(String, String)>,
}

impl Outcome {
    fn new(csv: String) -> Self {
        Outcome {
            csv,
            checks: Vec::new(),
            values: Vec::new(),
        }
    }

    fn check(mut self, name: &str, residual: f64, tolerance: f64) -> Self {
        self.checks.push(Check::new(name, residual, tolerance));
        self
    }

    fn value(mut self, key: &str, v: f64) -> Self {
        self.values.push((key.into(), format!("{v:.16e}")));
        self
    }
}

fn input(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}

fn load(common: &Common) -> Result<(String, RiemannianAlgebroid)> {
    match (&common.chart, &common.catalog) {
        (Some(p), None) => Ok((p.display().to_string(), chartfile::load(p)?)),
        (None, Some(name)) => Ok((name.clone(), catalog::get(name)?.geometry())),
        _ => Err(input("give exactly one of --chart and --catalog")),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|c| format!("{c:.16e}")).collect::<Vec<_>>().join(",")
}

fn start_of(geom: &RiemannianAlgebroid, s: &Start) -> Result<AVector> {
    if s.x.len() != geom.n() || s.mu.len() != geom.r() {
        return Err(Error::Dimension(format!("--x needs {} and --mu {} components", geom.n(), geom.r())));
    }
    Ok(AVector::new(s.x.clone(), s.mu.clone()))
}

fn tol(common: &Common, default: f64) -> f64 {
    common.tol.unwrap_or(default)
}

fn identities(out: Outcome, prefix: &str, ids: Vec<IdentityResidual>, tolerance: f64) -> Outcome {
    let mut out = out;
    for id in ids {
        out.checks.push(Check {
            name: format!("{prefix}{}", id.name),
            residual: id.residual,
            tolerance,
        });
    }
    out
}

fn write_report(dir: &Path, verb: &str, inputs: &[(String, String)], outcome: &Outcome, started: Instant) -> Result<bool> {
    let pass = outcome.checks.iter().all(Check::pass);
    let mut rep = String::new();
    let _ = writeln!(rep, "command={verb}");
    for (k, v) in inputs.iter().chain(&outcome.values) {
        let _ = writeln!(rep, "{k}={v}");
    }
    for c in &outcome.checks {
        match c.residual {
            Some(r) => {
                let _ = writeln!(rep, "check.{}.residual={r:.16e}", c.name);
            }
            None => {
                let _ = writeln!(rep, "check.{}.residual=n/a", c.name);
            }
        }
        let _ = writeln!(rep, "check.{}.tolerance={:.16e}", c.name, c.tolerance);
        let _ = writeln!(rep, "check.{}.pass={}", c.name, c.pass());
    }
    let _ = writeln!(rep, "pass={pass}");
    let _ = writeln!(rep, "wall_time_s={:.6}", started.elapsed().as_secs_f64());
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("{verb}.csv")), &outcome.csv)?;
    std::fs::write(dir.join("report.txt"), rep)?;
    Ok(pass)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DomainExit { .. } | Error::Transversality { .. } | Error::NotGeodesic(_) => 1,
        _ => 2,
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let started = Instant::now();
    match dispatch(cli.verb, started) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(verb: Verb, started: Instant) -> Result<bool> {
    if let Verb::Catalog { catalog: name, out } = &verb {
        return catalog_verb(name.as_deref(), out);
    }
    let (name, common) = match &verb {
        Verb::Validate(c) => ("validate", c),
        Verb::Geodesic { common, .. } => ("geodesic", common),
        Verb::Exp { common, .. } => ("exp", common),
        Verb::Transport { common, .. } => ("transport", common),
        Verb::Jacobi { common, .. } => ("jacobi", common),
        Verb::Curvature { common, .. } => ("curvature", common),
        Verb::Oneill { common, .. } => ("oneill", common),
        Verb::Divergence { common, .. } => ("divergence", common),
        Verb::Hamcheck { common, .. } => ("hamcheck", common),
        Verb::VariationCheck { common, .. } => ("variation-check", common),
        Verb::Catalog { .. } => unreachable!(),
    };
    let common = common.clone();
    let (source, geom) = load(&common)?;
    let inputs = vec![
        ("chart".to_string(), source),
        ("seed".to_string(), common.seed.to_string()),
    ];
    let outcome = match compute(&verb, &common, &geom) {
        Ok(o) => o,
        Err(Error::DomainExit { t, partial }) => {
            // keep what was integrated before the path left the chart
            let o = Outcome::new(partial.to_csv()).value("domain_exit_t", t).check("inside_domain", 1.0, 0.0);
            write_report(&common.out, name, &inputs, &o, started)?;
            return Err(Error::DomainExit { t, partial });
        }
        Err(e) => return Err(e),
    };
    write_report(&common.out, name, &inputs, &outcome, started)
}

fn compute(verb: &Verb, common: &Common, geom: &RiemannianAlgebroid) -> Result<Outcome> {
    let step = common.step.unwrap_or(DEFAULT_STEP);
    match verb {
        Verb::Validate(_) => {
            let rep = geom.chart.validate(common.samples.unwrap_or(crate::algebroid::DEFAULT_SAMPLES), common.seed)?;
            let t = tol(common, rep.tolerance);
            let mut out = Outcome::new(rep.to_csv());
            for axiom in [Axiom::Antisymmetry, Axiom::AnchorMorphism, Axiom::Jacobi] {
                out = out.check(axiom.name(), rep.check(axiom).max_residual, t);
            }
            Ok(out)
        }
        Verb::Geodesic { start, .. } => {
            let path = geom.geodesic(&start_of(geom, start)?, (0.0, start.t1), step)?;
            let res = path.apath_residual(geom)?;
            let drift = path.relative_energy_drift(geom)?;
            Ok(Outcome::new(path.to_csv())
                .check("apath", res, tol(common, APATH_TOL))
                .check("energy_drift", drift, tol(common, 1e-8)))
        }
        Verb::Exp { start, .. } => {
            let path = geom.geodesic(&start_of(geom, start)?, (0.0, start.t1), step)?;
            let end = path.end();
            let mut csv = String::new();
            let cols: Vec<String> = (1..=geom.n()).map(|i| format!("x{i}")).collect();
            let _ = writeln!(csv, "{}", cols.join(","));
            let _ = writeln!(csv, "{}", fmt_vec(&end.x));
            Ok(Outcome::new(csv).check("apath", path.apath_residual(geom)?, tol(common, APATH_TOL)))
        }
        Verb::Transport { start, s, .. } => {
            let path = geom.geodesic(&start_of(geom, start)?, (0.0, start.t1), step)?;
            let curve = geom.parallel_transport(&path, s)?;
            let norms = norms_along(geom, &path.states, &curve)?;
            let drift = norms.iter().map(|v| (v - norms[0]).abs()).fold(0.0, f64::max) / norms[0].max(1e-300);
            Ok(Outcome::new(curve.to_csv()).check("norm_drift", drift, tol(common, 1e-8)))
        }
        Verb::Jacobi { start, beta, dbeta, .. } => {
            let path = geom.geodesic(&start_of(geom, start)?, (0.0, start.t1), step)?;
            let (b, w) = geom.jacobi_with_derivative(&path, beta, dbeta)?;
            let mut csv = String::from("t");
            for u in 1..=geom.r() {
                let _ = write!(csv, ",beta{u}");
            }
            for u in 1..=geom.r() {
                let _ = write!(csv, ",dbeta{u}");
            }
            csv.push('\n');
            for k in 0..b.grid.len() {
                let _ = writeln!(csv, "{:.16e},{},{}", b.grid[k], fmt_vec(&b.values[k]), fmt_vec(&w.values[k]));
            }
            Ok(Outcome::new(csv).check("geodesic", geom.geodesic_residual(&path)?, tol(common, 1e-6)))
        }
        Verb::Curvature { x, a, b, expect, .. } => {
            let curv = geom.curvature(x)?;
            let mut out = Outcome::new(curv.to_csv());
            if !a.is_empty() || !b.is_empty() {
                let k = geom.sectional_curvature(x, a, b)?;
                out = out.value("sectional", k);
                if let Some(e) = expect {
                    out = out.check("sectional", (k - e).abs(), tol(common, 1e-6));
                }
            }
            Ok(out)
        }
        Verb::Oneill { x, .. } => {
            let tensors = geom.oneill_tensors(x)?;
            let frame = &tensors.frame;
            let mut out = Outcome::new(tensors.to_csv());
            out.values.push(("rank".into(), frame.q.to_string()));
            out.values.push(("rank_warning".into(), frame.rank_warning.to_string()));
            out = identities(out, "", geom.oneill_identities(x)?, tol(common, 1e-7));
            match geom.oneill_curvature_check(x) {
                Ok(ids) => out = identities(out, "curvature_", ids, tol(common, 1e-6)),
                Err(Error::Unsupported(_)) => out.values.push(("curvature_identities".into(), "n/a".into())),
                Err(e) => return Err(e),
            }
            Ok(out)
        }
        Verb::Divergence { mu_scale, .. } => divergence(common, geom, *mu_scale),
        Verb::Hamcheck { mu_scale, .. } => {
            let rep = geom.hamiltonian_check(common.samples.unwrap_or(100), common.seed, *mu_scale)?;
            Ok(Outcome::new(rep.to_csv())
                .check("difference", rep.max_difference(), tol(common, 1e-8))
                .check("euler", rep.max_euler(), tol(common, 1e-8))
                .check("self_bracket", rep.max_self_bracket(), tol(common, 1e-8)))
        }
        Verb::VariationCheck { start, u, grid, eps_step, .. } => match grid {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                let g = VariationGrid::from_csv(&text, geom.n(), geom.r(), true)?;
                let fv = geom.first_variation(&g)?;
                Ok(Outcome::new(g.to_csv())
                    .value("first_variation_lhs", fv.lhs)
                    .check("delta_anchor", geom.delta_anchor_residual(&g)?, tol(common, 1e-5))
                    .check("first_variation", fv.residual(), tol(common, 1e-5)))
            }
            None => {
                let a = start_of(geom, start)?;
                if u.len() != geom.r() {
                    return Err(Error::Dimension(format!("--u needs {} components", geom.r())));
                }
                let rep = geom.jacobi_from_geodesic_pencil(&a, u, *eps_step)?;
                let eps = [-*eps_step, 0.0, *eps_step];
                let pencil = geom.geodesic_pencil(&a, u, &eps, DEFAULT_STEP)?;
                let sol = geom.solve_transverse(&pencil, &vec![vec![0.0; geom.r()]; 3])?;
                Ok(Outcome::new(sol.grid.to_csv())
                    .check("transversality", sol.transversality, tol(common, TRANSVERSALITY_TOL))
                    .check("delta_anchor", geom.delta_anchor_residual(&sol.grid)?, tol(common, 1e-5))
                    .check("pencil_vs_jacobi", rep.deviation, tol(common, 1e-4)))
            }
        },
        Verb::Catalog { .. } => unreachable!(),
    }
}

fn norms_along(geom: &RiemannianAlgebroid, states: &[AVector], curve: &FiberCurve) -> Result<Vec<f64>> {
    states
        .iter()
        .zip(&curve.values)
        .map(|(s, v)| Ok(inner(&geom.metric.values(&s.x)?, v, v)))
        .collect()
}

/// First row at the domain center with `mu = e_1`, then sampled points.
fn divergence(common: &Common, geom: &RiemannianAlgebroid, mu_scale: f64) -> Result<Outcome> {
    let (n, r) = (geom.n(), geom.r());
    let mut domain = geom.chart.domain().to_vec();
    // stay clear of the chart boundary for the difference stencils
    for d in domain.iter_mut() {
        let pad = 0.05 * (d.1 - d.0);
        *d = (d.0 + pad, d.1 - pad);
    }
    let center: Vec<f64> = domain.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut e1 = vec![0.0; r];
    e1[0] = 1.0;
    let mut points = vec![AVector::new(center, e1)];
    domain.extend(std::iter::repeat_n((-mu_scale, mu_scale), r));
    for z in sample_box(&domain, common.samples.unwrap_or(50), common.seed) {
        points.push(AVector::new(z[..n].to_vec(), z[n..].to_vec()));
    }
    let mut csv = String::new();
    for i in 1..=n {
        let _ = write!(csv, "x{i},");
    }
    for u in 1..=r {
        let _ = write!(csv, "mu{u},");
    }
    csv.push_str("trace,mean_curvature,total,finite_difference\n");
    let mut worst: Option<f64> = None;
    for p in &points {
        let d = geom.divergence_xe(p)?;
        let fd = match geom.divergence_fd(p, 1e-5) {
            Ok(v) => Some(v),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err(e),
        };
        if let Some(v) = fd {
            worst = Some(worst.unwrap_or(0.0).max((v - d.total()).abs()));
        }
        let fd_text = fd.map_or("nan".to_string(), |v| format!("{v:.16e}"));
        let _ = writeln!(
            csv,
            "{},{},{:.16e},{:.16e},{:.16e},{fd_text}",
            fmt_vec(&p.x),
            fmt_vec(&p.mu),
            d.trace_term,
            d.mean_curvature_term,
            d.total()
        );
    }
    let mut out = Outcome::new(csv);
    out.checks.push(Check {
        name: "finite_difference".into(),
        residual: worst,
        tolerance: tol(common, 1e-5),
    });
    Ok(out)
}

fn catalog_verb(name: Option<&str>, out: &Path) -> Result<bool> {
    std::fs::create_dir_all(out)?;
    match name {
        Some(name) => {
            let e = catalog::get(name)?;
            let text = chartfile::write(&e.geometry(), Some(e.description));
            std::fs::write(out.join(format!("{name}.chart")), text)?;
        }
        None => {
            let mut csv = String::from("name,n,r,description\n");
            for name in catalog::NAMES {
                let e = catalog::get(name)?;
                let _ = writeln!(csv, "{name},{},{},\"{}\"", e.chart.n(), e.chart.r(), e.description.replace('"', "'"));
            }
            std::fs::write(out.join("catalog.csv"), csv)?;
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_in(dir: &Path, args: &[&str]) -> i32 {
        let out = dir.to_str().unwrap();
        let mut argv = vec!["algebroid"];
        argv.extend_from_slice(args);
        argv.extend_from_slice(&["--out", out]);
        run(argv)
    }

    fn report(dir: &Path) -> String {
        std::fs::read_to_string(dir.join("report.txt")).unwrap()
    }

    #[test]
    fn validate_and_hamcheck_pass() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["validate", "--catalog", "so3_biinv"]), 0);
        assert!(report(dir.path()).contains("pass=true"));
        assert_eq!(run_in(dir.path(), &["hamcheck", "--catalog", "aff2", "--samples", "100"]), 0);
        assert_eq!(std::fs::read_to_string(dir.path().join("hamcheck.csv")).unwrap().lines().count(), 101);
    }

    #[test]
    fn divergence_csv_starts_at_unit_vector() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["divergence", "--catalog", "aff2", "--samples", "50"]), 0);
        let csv = std::fs::read_to_string(dir.path().join("divergence.csv")).unwrap();
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&row[1..3], &[1.0, 0.0]);
        assert!((row[5] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn output_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            assert_eq!(run_in(d.path(), &["hamcheck", "--catalog", "heisenberg_central", "--samples", "20"]), 0);
        }
        let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("hamcheck.csv")).unwrap();
        assert_eq!(read(&a), read(&b));
    }

    #[test]
    fn domain_exit_keeps_partial_path() {
        let dir = tempfile::tempdir().unwrap();
        let code = run_in(dir.path(), &["geodesic", "--catalog", "euclidean2", "--x", "9,0", "--mu", "5,0"]);
        assert_eq!(code, 1);
        let csv = std::fs::read_to_string(dir.path().join("geodesic.csv")).unwrap();
        assert!(csv.lines().count() > 100);
    }

    #[test]
    fn bad_input_exits_with_two() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.chart");
        std::fs::write(&file, "[algebroid]\nn = 1\nr = x\n").unwrap();
        assert_eq!(run_in(dir.path(), &["validate", "--chart", file.to_str().unwrap()]), 2);
        assert_eq!(run_in(dir.path(), &["validate", "--catalog", "nope"]), 2);
        assert_eq!(run(["algebroid", "frobnicate"]), 2);
    }

    #[test]
    fn catalog_writes_loadable_chart() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["catalog", "--catalog", "sphere_chart"]), 0);
        let chart = dir.path().join("sphere_chart.chart");
        assert_eq!(
            run_in(
                dir.path(),
                &["curvature", "--chart", chart.to_str().unwrap(), "--x", "1,1", "--a", "1,0", "--b", "0,1", "--expect", "1"]
            ),
            0
        );
        assert_eq!(run_in(dir.path(), &["catalog"]), 0);
        assert_eq!(std::fs::read_to_string(dir.path().join("catalog.csv")).unwrap().lines().count(), 7);
    }

    #[test]
    fn oneill_and_variation_verbs() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run_in(dir.path(), &["oneill", "--catalog", "heisenberg_central", "--x", "0.1,0.2"]), 0);
        assert!(report(dir.path()).contains("check.curvature_vertical_pairs.residual=n/a"));
        let code = run_in(
            dir.path(),
            &["variation-check", "--catalog", "sphere_chart", "--x", "1.5,0.5", "--mu", "0.3,1", "--u", "0.5,-0.2"],
        );
        assert_eq!(code, 0, "{}", report(dir.path()));
        for verb in ["transport", "jacobi", "exp"] {
            let mut args = vec![verb, "--catalog", "sphere_chart", "--x", "1.5,0.5", "--mu", "0.3,1"];
            match verb {
                "transport" => args.extend(["--s", "1,2"]),
                "jacobi" => args.extend(["--beta", "0,0", "--dbeta", "1,0"]),
                _ => {}
            }
            assert_eq!(run_in(dir.path(), &args), 0, "{verb}");
            assert!(dir.path().join(format!("{verb}.csv")).exists());
        }
    }
}
