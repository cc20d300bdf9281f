//! Acceptance suite: one PASS/FAIL line per criterion.

use algebroid::catalog;
use algebroid::metric::inner;
use algebroid::numeric::{max_abs_diff, norm, sample_box, uniform_grid};
use algebroid::oneill::TangentVector;
use algebroid::variations::{MeshField, VariationGrid};
use algebroid::{AVector, RiemannianAlgebroid};
use std::f64::consts::PI;
use std::path::Path;

const SEED: u64 = 42;

fn geom(name: &str) -> RiemannianAlgebroid {
    catalog::get(name).unwrap().geometry()
}

fn transitive() -> [&'static str; 3] {
    ["euclidean2", "sphere_chart", "heisenberg_central"]
}

/// Points in the middle half of the chart with fibers in `[-scale, scale]^r`.
fn interior_points(g: &RiemannianAlgebroid, count: usize, scale: f64, seed: u64) -> Vec<AVector> {
    let mut dom: Vec<(f64, f64)> = g
        .chart
        .domain()
        .iter()
        .map(|&(lo, hi)| (0.75 * lo + 0.25 * hi, 0.25 * lo + 0.75 * hi))
        .collect();
    dom.extend(std::iter::repeat_n((-scale, scale), g.r()));
    sample_box(&dom, count, seed)
        .into_iter()
        .map(|z| AVector::new(z[..g.n()].to_vec(), z[g.n()..].to_vec()))
        .collect()
}

struct Line {
    ok: bool,
    detail: String,
}

fn line(ok: bool, detail: String) -> Line {
    Line { ok, detail }
}

fn hamiltonian_equivalence() -> Line {
    let mut worst: f64 = 0.0;
    for name in catalog::NAMES {
        let rep = geom(name).hamiltonian_check(100, SEED, 1.0).unwrap();
        worst = worst.max(rep.max_difference());
    }
    line(worst < 1e-8, format!("max field difference {worst:.3e} over 6 entries x 100 points (tol 1e-8)"))
}

fn biinvariant_lie_algebra() -> Line {
    let g = geom("so3_biinv");
    let mut gamma_err: f64 = 0.0;
    for z in sample_box(g.chart.domain(), 20, SEED) {
        let gam = g.christoffel(&z).unwrap();
        let c = g.chart.bracket_values(&z).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    gamma_err = gamma_err.max((gam.get(i, j, k) - 0.5 * c[(i * 3 + j) * 3 + k]).abs());
                }
            }
        }
    }
    let start = AVector::new(vec![0.0], vec![0.3, -0.7, 0.5]);
    let path = g.geodesic(&start, (0.0, 10.0), 1e-3).unwrap();
    let drift = path.states.iter().map(|s| max_abs_diff(&s.mu, &start.mu)).fold(0.0, f64::max);
    line(
        gamma_err < 1e-14 && drift < 1e-12,
        format!("|Gamma - C/2| {gamma_err:.3e} (tol 1e-14), mu drift on [0,10] {drift:.3e} (tol 1e-12)"),
    )
}

fn divergence_formula() -> Line {
    let mut fd_err: f64 = 0.0;
    for name in ["aff2", "so3_biinv"] {
        let g = geom(name);
        let mut dom = g.chart.domain().to_vec();
        dom.extend(std::iter::repeat_n((-1.0, 1.0), g.r()));
        for z in sample_box(&dom, 50, SEED) {
            let v = AVector::new(z[..1].to_vec(), z[1..].to_vec());
            let fd = g.divergence_fd(&v, 1e-5).unwrap();
            fd_err = fd_err.max((g.divergence_xe(&v).unwrap().total() - fd).abs());
        }
    }
    let aff = geom("aff2").divergence_xe(&AVector::new(vec![0.0], vec![1.0, 0.0])).unwrap().total();
    let so3 = geom("so3_biinv");
    let so3_max = interior_points(&so3, 50, 1.0, SEED)
        .iter()
        .map(|v| so3.divergence_xe(v).unwrap().total().abs())
        .fold(0.0, f64::max);
    let mut liouville: f64 = 0.0;
    for name in ["euclidean2", "sphere_chart"] {
        let g = geom(name);
        for v in interior_points(&g, 50, 1.0, SEED) {
            liouville = liouville.max(g.divergence_xe(&v).unwrap().total().abs());
        }
    }
    let ok = fd_err < 1e-5 && (aff - 1.0).abs() < 1e-6 && so3_max < 1e-9 && liouville < 1e-9;
    line(
        ok,
        format!(
            "formula vs FD {fd_err:.3e} (tol 1e-5), aff2 at e1 {aff:.12}, so3 max {so3_max:.3e}, tangent bundles max {liouville:.3e} (tol 1e-9)"
        ),
    )
}

fn energy_conservation() -> Line {
    let mut energy: f64 = 0.0;
    let mut transport: f64 = 0.0;
    for name in catalog::NAMES {
        let g = geom(name);
        for (k, v) in interior_points(&g, 5, 0.5, SEED).into_iter().enumerate() {
            let path = g.geodesic(&v, (0.0, 1.0), 1e-3).unwrap();
            energy = energy.max(path.relative_energy_drift(&g).unwrap());
            let s0: Vec<f64> = (0..g.r()).map(|u| ((u + k) as f64 * 0.7).cos()).collect();
            let s = g.parallel_transport(&path, &s0).unwrap();
            let norms: Vec<f64> = path
                .states
                .iter()
                .zip(&s.values)
                .map(|(st, sv)| inner(&g.metric.values(&st.x).unwrap(), sv, sv))
                .collect();
            transport = transport.max(norms.iter().map(|n| (n - norms[0]).abs() / norms[0]).fold(0.0, f64::max));
        }
    }
    line(
        energy < 1e-8 && transport < 1e-8,
        format!("relative energy drift {energy:.3e}, transported norm drift {transport:.3e} (tol 1e-8)"),
    )
}

fn sectional(p: &algebroid::metric::PointGeometry, u: &[f64], v: &[f64]) -> f64 {
    let ruv = p.curvature().apply(u, v, u);
    let gram = p.inner(u, u) * p.inner(v, v) - p.inner(u, v).powi(2);
    -p.inner(&ruv, v) / gram
}

fn curvature() -> Line {
    let s = geom("sphere_chart");
    let sphere = interior_points(&s, 20, 1.0, SEED)
        .iter()
        .map(|v| (s.sectional_curvature(&v.x, &[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs())
        .fold(0.0, f64::max);
    let h = geom("heisenberg_central");
    let x = [0.3, -0.2];
    let (a1, a2) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
    let k = h.sectional_curvature(&x, &a1, &a2).unwrap();
    let leaf = h.leaf_geometry(&x).unwrap();
    let k_tilde = sectional(&leaf, &[1.0, 0.0], &[0.0, 1.0]);
    let hv = h.oneill_h(&x, &a1, &a2).unwrap();
    let h2 = hv.iter().map(|c| c * c).sum::<f64>();
    let ok = sphere < 1e-6
        && (k + 0.75).abs() < 1e-6
        && k_tilde.abs() < 1e-6
        && (h2 - 0.25).abs() < 1e-6
        && (k - (k_tilde - 3.0 * h2)).abs() < 1e-6;
    line(
        ok,
        format!("sphere |K-1| {sphere:.3e}; heisenberg K {k:.12}, leaf K {k_tilde:.3e}, |H|^2 {h2:.12} (tol 1e-6)"),
    )
}

fn jacobi_machinery() -> Line {
    // scaling solution beta = k t alpha along a geodesic
    let mut scaling: f64 = 0.0;
    for name in ["sphere_chart", "heisenberg_central", "aff2"] {
        let g = geom(name);
        let v = &interior_points(&g, 1, 0.5, SEED)[0];
        let path = g.geodesic(v, (0.0, 1.0), 1e-3).unwrap();
        let kk = 1.7;
        let d0: Vec<f64> = v.mu.iter().map(|m| kk * m).collect();
        let beta = g.jacobi(&path, &vec![0.0; g.r()], &d0).unwrap();
        for ((t, b), st) in beta.grid.iter().zip(&beta.values).zip(&path.states) {
            let expect: Vec<f64> = st.mu.iter().map(|m| kk * t * m).collect();
            scaling = scaling.max(max_abs_diff(b, &expect));
        }
    }
    let s = geom("sphere_chart");
    let pencil = s
        .jacobi_from_geodesic_pencil(&AVector::new(vec![PI / 2.0, 0.5], vec![0.3, 1.0]), &[0.5, -0.2], 1e-3)
        .unwrap()
        .deviation;
    let mut dexp: f64 = 0.0;
    for name in transitive() {
        let g = geom(name);
        for (k, v) in interior_points(&g, 3, 0.5, SEED).into_iter().enumerate() {
            let u: Vec<f64> = (0..g.r()).map(|i| ((i + 2 * k) as f64).sin() + 0.3).collect();
            let d = g.dexp(&v.x, &v.mu, &u, 1e-3).unwrap();
            let h = 1e-4;
            let shifted = |sign: f64| {
                let a: Vec<f64> = v.mu.iter().zip(&u).map(|(m, du)| m + sign * h * du).collect();
                g.exp_map(&v.x, &a, 1e-3).unwrap()
            };
            let (p, m) = (shifted(1.0), shifted(-1.0));
            let fd: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            dexp = dexp.max(max_abs_diff(&d, &fd) / norm(&fd).max(1e-12));
        }
    }
    line(
        scaling < 1e-8 && pencil < 1e-4 && dexp < 1e-4,
        format!("scaling solution {scaling:.3e} (tol 1e-8), pencil vs ODE {pencil:.3e}, dexp vs FD relative {dexp:.3e} (tol 1e-4)"),
    )
}

fn connector_and_homogeneity() -> Line {
    let mut conn: f64 = 0.0;
    for name in transitive() {
        let g = geom(name);
        for v in interior_points(&g, 100, 1.0, SEED) {
            let (dx, dmu) = g.hamiltonian_field(&v).unwrap();
            let k = g.connector(&v, &TangentVector::new(dx, dmu)).unwrap();
            let local = g.local(&v.x).unwrap();
            let av = local.frame.vertical_part(&v.mu);
            let rhs = local.point.gamma(&av, &v.mu);
            conn = conn.max(k.iter().zip(&rhs).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max));
        }
    }
    let mut homog: f64 = 0.0;
    for name in catalog::NAMES {
        let g = geom(name);
        let mut dom = g.chart.domain().to_vec();
        dom.extend(std::iter::repeat_n((-1.0, 1.0), g.r()));
        for z in sample_box(&dom, 100, SEED) {
            let v = AVector::new(z[..g.n()].to_vec(), z[g.n()..].to_vec());
            homog = homog.max(g.euler_identity_residual(&v).unwrap());
        }
    }
    line(
        conn < 1e-9 && homog < 1e-12,
        format!("connector residual {conn:.3e} (tol 1e-9), homogeneity residual {homog:.3e} (tol 1e-12)"),
    )
}

fn heisenberg_mesh(m: usize) -> (VariationGrid, MeshField) {
    let step = 1.0 / (m - 1) as f64;
    let eps = uniform_grid(-0.5, 0.5, step);
    let t = uniform_grid(0.0, 1.0, step);
    let (mut alpha, mut beta, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for &e in &eps {
        for &u in &t {
            alpha.push(AVector::new(
                vec![u.sin() + e * u, (e * u).cos()],
                vec![u.cos() + e, -e * (e * u).sin(), (u + 2.0 * e).sin()],
            ));
            beta.push(vec![u, -u * (e * u).sin(), (u * e).exp()]);
            s.push(vec![(u - e).cos(), e * u * u, 1.0 + (2.0 * u).sin()]);
        }
    }
    (VariationGrid::new(eps, t, alpha, Some(beta)).unwrap(), s)
}

fn variations() -> Line {
    let h = geom("heisenberg_central");
    // transverse variation of leaf curves with an arbitrary vertical part
    let eps = uniform_grid(-0.1, 0.1, 0.01);
    let t = uniform_grid(0.0, 1.0, 0.001);
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for &e in &eps {
        for &s in &t {
            let x = vec![s + e * s * s, 0.3 * s.sin() * (1.0 + e * s)];
            let dx2 = 0.3 * (s.cos() * (1.0 + e * s) + e * s.sin());
            alpha.push(AVector::new(x, vec![1.0 + 2.0 * e * s, dx2, (e * s).cos()]));
            beta.push(vec![s * s, 0.3 * s.sin() * s, s - e]);
        }
    }
    let grid = VariationGrid::new(eps, t, alpha, Some(beta)).unwrap();
    let anchor = h.delta_anchor_residual(&grid).unwrap();

    // fixed-endpoint homotopies of geodesics
    let mut fv_res: f64 = 0.0;
    let mut fv_de: f64 = 0.0;
    let homotopies: [(&str, [f64; 2], [f64; 2]); 2] =
        [("euclidean2", [0.0, 0.0], [1.0, 0.5]), ("sphere_chart", [PI / 2.0, 0.5], [0.0, 1.0])];
    for (name, x0, v) in homotopies {
        let g = geom(name);
        let eps = uniform_grid(-0.05, 0.05, 0.01);
        let t = uniform_grid(0.0, 1.0, 0.001);
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        for &e in &eps {
            for &s in &t {
                let bump = (PI * s).sin();
                let x = vec![x0[0] + v[0] * s + e * bump, x0[1] + v[1] * s];
                alpha.push(AVector::new(x, vec![v[0] + e * PI * (PI * s).cos(), v[1]]));
                beta.push(vec![bump, 0.0]);
            }
        }
        let grid = VariationGrid::new(eps, t, alpha, Some(beta)).unwrap();
        let fv = g.first_variation(&grid).unwrap();
        fv_res = fv_res.max(fv.residual());
        fv_de = fv_de.max(fv.lhs.abs());
    }

    let res: Vec<f64> = [21, 41, 81]
        .iter()
        .map(|&m| {
            let (grid, s) = heisenberg_mesh(m);
            h.curvature_commutation_residual(&grid, &s).unwrap()
        })
        .collect();
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order_ok = orders.iter().all(|o| *o >= 2.0 - 0.1);
    line(
        anchor < 1e-5 && fv_res < 1e-5 && fv_de < 1e-5 && order_ok,
        format!(
            "|#Delta| {anchor:.3e} (tol 1e-5), first variation {fv_res:.3e} with |dE/deps| {fv_de:.3e} (tol 1e-5), commutation orders {:.2}, {:.2} (need 2 within 0.1)",
            orders[0], orders[1]
        ),
    )
}

fn mutant_run(dir: &Path, name: &str, extra: &str) -> (i32, f64, f64) {
    let text = algebroid::chartfile::write(&geom("heisenberg_central"), None);
    assert!(text.contains("\n[metric]"));
    let text = text.replace("\n[metric]", &format!("{extra}\n\n[metric]"));
    let path = dir.join(format!("{name}.chart"));
    std::fs::write(&path, text).unwrap();
    let out = dir.join(name);
    let code = algebroid::cli::run([
        "algebroid",
        "validate",
        "--chart",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let report = std::fs::read_to_string(out.join("report.txt")).unwrap();
    let get = |key: &str| -> f64 {
        report
            .lines()
            .find_map(|l| l.strip_prefix(&format!("check.{key}.residual=")))
            .unwrap()
            .parse()
            .unwrap()
    };
    (code, get("jacobi"), get("anchor_morphism"))
}

fn mutants() -> Line {
    let dir = tempfile::tempdir().unwrap();
    let (code_a, jac_a, _) = mutant_run(dir.path(), "jacobi_mutant", "C 1,3,1 = 1");
    let (code_b, _, anc_b) = mutant_run(dir.path(), "anchor_mutant", "C 1,3,2 = 1");
    line(
        code_a == 1 && code_b == 1 && jac_a >= 0.9 && anc_b >= 0.9,
        format!("C_13^1 mutant: exit {code_a}, jacobi {jac_a:.3}; C_13^2 mutant: exit {code_b}, anchor {anc_b:.3} (need >= 0.9, exit 1)"),
    )
}

fn leaf_correspondence() -> Line {
    let g = geom("heisenberg_central");
    let mut worst: f64 = 0.0;
    for v in interior_points(&g, 5, 1.0, SEED) {
        let mu = vec![v.mu[0], v.mu[1], 0.0];
        let path = g.geodesic(&AVector::new(v.x.clone(), mu.clone()), (0.0, 1.0), 1e-3).unwrap();
        let leaf = g.leaf_geodesic(&v.x, &mu[..2], (0.0, 1.0), 1e-3).unwrap();
        for (s, y) in path.states.iter().zip(&leaf) {
            worst = worst.max(max_abs_diff(&s.x, y));
        }
    }
    line(worst < 1e-7, format!("horizontal geodesic vs leaf geodesic {worst:.3e} (tol 1e-7)"))
}

fn main() {
    let criteria: [(&str, fn() -> Line); 10] = [
        ("hamiltonian-geodesic equivalence", hamiltonian_equivalence),
        ("bi-invariant Lie algebra", biinvariant_lie_algebra),
        ("divergence formula", divergence_formula),
        ("energy conservation", energy_conservation),
        ("curvature", curvature),
        ("Jacobi machinery", jacobi_machinery),
        ("connector and homogeneity", connector_and_homogeneity),
        ("variations", variations),
        ("validation catches defects", mutants),
        ("leaf geodesic correspondence", leaf_correspondence),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let l = f();
        let tag = if l.ok { "PASS" } else { "FAIL" };
        println!("{tag} {:>2} {name}: {}", k + 1, l.detail);
        if !l.ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
