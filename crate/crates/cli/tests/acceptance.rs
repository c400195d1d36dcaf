//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every criterion is evaluated in full and its failures are listed. The
//! process exits non-zero on a failed criterion only when
//! `RICHARDS_ACCEPTANCE_STRICT=1`; randomized criteria honour `RICHARDS_SEED`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use richards_cli::builtins;
use richards_cli::output::diagnostics_csv_string;
use richards_cli::{run_sweep, simulate, Scenario};
use richards_core::assembly::AssembledOperators;
use richards_core::constitutive::{vgm_krel, vgm_krel_taylor};
use richards_core::diagnostics;
use richards_core::mesh::{build_lattice_mesh, build_rect_mesh, check_weakly_acute, Mesh, Side, WEAKLY_ACUTE_TOL};
use richards_core::schemes::{Scheme, SchemeConfig, Simulation, State};
use richards_core::sparse::dense_inverse_oracle;
use richards_core::{SoilKind, SoilModel, StepDiagnostics};
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Default)]
struct Check {
    failures: Vec<String>,
}

impl Check {
    fn require(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }
}

fn diagnostics_of(name: &str) -> Vec<StepDiagnostics> {
    let cfg = builtins::parse(builtins::find(name).expect("builtin exists"));
    let s = Scenario::build(&cfg).expect("builtin builds");
    let out = simulate(&s, |_| {}).expect("simulation starts");
    assert!(out.error.is_none(), "{name} failed: {:?}", out.error);
    out.diagnostics
}

fn rng() -> ChaCha8Rng {
    let seed = std::env::var("RICHARDS_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(7_2024_u64);
    ChaCha8Rng::seed_from_u64(seed)
}

fn implicit_bounds() -> Check {
    let mut c = Check::default();
    let d = diagnostics_of("test2-implicit");
    c.require(d.len() == 10, || format!("{} steps instead of 10", d.len()));
    for r in &d {
        c.require((r.theta_min - 0.2).abs() <= 1e-6, || format!("t={}: theta_min = {}", r.t, r.theta_min));
        c.require(r.theta_max <= 1.0 + 1e-10, || format!("t={}: theta_max = {}", r.t, r.theta_max));
    }
    c
}

fn explicit_violation() -> Check {
    let mut c = Check::default();
    let d = diagnostics_of("test2-explicit");
    c.require(d.len() == 10, || format!("{} steps instead of 10", d.len()));
    for r in &d {
        c.require(!r.condition_met, || format!("t={}: condition_met is true", r.t));
        c.require(r.theta_min < 0.0, || format!("t={}: theta_min = {} is not negative", r.t, r.theta_min));
        c.require((-0.55..=-0.15).contains(&r.theta_min), || {
            format!("t={}: theta_min = {} outside [-0.55, -0.15]", r.t, r.theta_min)
        });
        c.require((r.theta_max - 1.0).abs() <= 1e-6, || format!("t={}: theta_max = {}", r.t, r.theta_max));
    }
    c
}

fn explicit_verification() -> Check {
    let mut c = Check::default();
    let d = diagnostics_of("test2-explicit-verify");
    for r in &d {
        c.require(r.condition_met, || format!("t={}: condition_met is false", r.t));
        c.require(r.theta_min >= 0.2 - 1e-6 && r.theta_max <= 1.0 + 1e-10, || {
            format!("t={}: theta in [{}, {}]", r.t, r.theta_min, r.theta_max)
        });
    }
    let first = d[0].tau_crit;
    c.require((first - 0.311894).abs() <= 0.3 * 0.311894, || format!("first tau_crit = {first}"));
    c
}

fn both_conditions() -> Check {
    let mut c = Check::default();
    let d = diagnostics_of("test3");
    let t_end = d.last().map_or(0.0, |r| r.t);
    c.require((t_end - 20.0).abs() < 1e-9, || format!("run ends at t = {t_end}"));
    for r in &d {
        c.require(r.rowsum_min > 0.0, || format!("t={}: rowsum_min = {}", r.t, r.rowsum_min));
        c.require(r.peclet_max < 1.0, || format!("t={}: peclet_max = {}", r.t, r.peclet_max));
        c.require(r.theta_min >= 0.2 - 1e-8 && r.theta_max <= 0.8 + 1e-8, || {
            format!("t={}: theta in [{}, {}]", r.t, r.theta_min, r.theta_max)
        });
    }
    c
}

fn advection_sweep() -> Check {
    let mut c = Check::default();
    let base = builtins::parse(builtins::find("sweep-test5").unwrap());
    let meshes = [40, 80, 160, 400];
    let reference = [16.743, 4.080, 1.007, 0.160];
    let rows = run_sweep(&base, &meshes, None, None).expect("sweep runs");
    for r in &rows {
        c.require(r.error.is_none(), || format!("N={}: {:?}", r.n, r.error));
    }
    for w in rows.windows(2) {
        c.require(w[1].pe_max < w[0].pe_max, || format!("pe_max {} -> {} does not decrease", w[0].pe_max, w[1].pe_max));
    }
    for (r, p) in rows.iter().zip(reference) {
        c.require((r.pe_max - p).abs() <= 0.3 * p, || format!("N={}: pe_max = {} vs {p}", r.n, r.pe_max));
        c.require(r.theta_max > 1.0, || format!("N={}: theta_max = {}", r.n, r.theta_max));
        if r.n == 400 {
            c.require(r.theta_min >= 0.2 - 1e-6, || format!("N=400: theta_min = {}", r.theta_min));
        } else {
            c.require(r.theta_min < 0.0, || format!("N={}: theta_min = {} is not negative", r.n, r.theta_min));
        }
    }
    c
}

fn random_interval(rng: &mut ChaCha8Rng) -> Mesh {
    let n = rng.gen_range(6..60);
    let mut vertices = vec![[0.0, 0.0]];
    let mut z = 0.0;
    for _ in 0..n {
        z += rng.gen_range(0.2..1.0);
        vertices.push([z, 0.0]);
    }
    let elements = (0..n).flat_map(|i| [i, i + 1]).collect();
    Mesh::from_parts(1, vertices, elements, BTreeMap::from([(0, Side::Left), (n, Side::Right)])).unwrap()
}

fn random_lattice(rng: &mut ChaCha8Rng) -> Mesh {
    let nx = rng.gen_range(3..12);
    let nz = rng.gen_range(3..12);
    let h = rng.gen_range(0.5..5.0);
    let mut jit = ChaCha8Rng::seed_from_u64(rng.gen());
    build_lattice_mesh(nx, nz, h, |_| [jit.gen_range(-0.08..0.08) * h, jit.gen_range(-0.08..0.08) * h]).unwrap()
}

fn boundary_values(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    mesh.boundary_nodes().iter().map(|&v| u[v]).collect()
}

fn positivity_properties() -> Check {
    let mut c = Check::default();
    let mut rng = rng();
    for case in 0..20 {
        let mesh = if case % 2 == 0 { random_interval(&mut rng) } else { random_lattice(&mut rng) };
        c.require(mesh.n_vertices() <= 200 && check_weakly_acute(&mesh, WEAKLY_ACUTE_TOL).passed, || {
            format!("(a) case {case}: mesh is not a small weakly acute mesh")
        });
        let u: Vec<f64> =
            (0..mesh.n_vertices()).map(|_| if rng.gen_bool(0.15) { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
        let (ks, n) = (rng.gen_range(0.5..10.0), rng.gen_range(1.5..3.0));
        let mut alpha = rng.gen_range(0.01..1.0);
        let soil = loop {
            let s = SoilModel::van_genuchten(ks, alpha, n, 0.45, 0.05).unwrap();
            if diagnostics::peclet_check(&mesh, &s, &u).unwrap().condition_ok {
                break s;
            }
            alpha *= 0.5;
        };
        let tau = rng.gen_range(0.1..10.0);
        let ops = AssembledOperators::assemble(&mesh, &soil, &u, &boundary_values(&mesh, &u)).unwrap();
        let interior = mesh.interior_nodes();
        let b = ops
            .s_full
            .submatrix(interior, interior)
            .scaled(tau)
            .with_added_diagonal(&ops.interior_mass(&mesh))
            .unwrap();
        let worst_off = b.triplets().into_iter().filter(|t| t.0 != t.1).map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
        c.require(worst_off <= 1e-14, || format!("(a) case {case}: off-diagonal {worst_off}"));
        let inv_min = dense_inverse_oracle(&b).unwrap().into_iter().flatten().fold(f64::INFINITY, f64::min);
        c.require(inv_min >= -1e-12, || format!("(a) case {case}: inverse entry {inv_min}"));
    }
    for case in 0..20 {
        let mesh = build_rect_mesh(
            50.0,
            200.0,
            rng.gen_range(3..8),
            rng.gen_range(4..10),
            &[Side::Bottom, Side::Top].into_iter().collect(),
        )
        .unwrap();
        let soil =
            SoilModel::van_genuchten(rng.gen_range(1.0..10.0), rng.gen_range(0.01..0.1), 2.0, 0.45, 0.05).unwrap();
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(0.05..1.0)).collect();
        let bc = boundary_values(&mesh, &u);
        let mut cfg = SchemeConfig::new(Scheme::ExplicitGravity, 1e6, 1e9);
        cfg.adaptive = true;
        cfg.adaptive_safety = 0.5;
        let sim = Simulation::new(&mesh, &soil, cfg, State { time: 0.0, u }, &bc).unwrap();
        for rec in sim.take(10) {
            match rec {
                Ok(r) => {
                    let lo = mesh.interior_nodes().iter().map(|&v| r.state.u[v]).fold(f64::INFINITY, f64::min);
                    c.require(lo > 0.0, || format!("(b) case {case} t={}: min interior u = {lo}", r.state.time));
                }
                Err(e) => {
                    c.failures.push(format!("(b) case {case}: {e}"));
                    break;
                }
            }
        }
    }
    c
}

fn algebraic_identities() -> Check {
    let mut c = Check::default();
    let mut rng = rng();
    for case in 0..20 {
        let mesh = if case % 2 == 0 { random_interval(&mut rng) } else { random_lattice(&mut rng) };
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let soil = SoilModel::van_genuchten(rng.gen_range(0.5..10.0), rng.gen_range(0.01..0.5), 2.0, 0.45, 0.05).unwrap();
        let ops = AssembledOperators::assemble(&mesh, &soil, &u, &boundary_values(&mesh, &u)).unwrap();
        let total: f64 = ops.lumped_mass.iter().sum();
        c.require((total - mesh.measure()).abs() <= 1e-12 * mesh.measure(), || {
            format!("case {case}: mass {total} vs measure {}", mesh.measure())
        });
        let a_rows = ops.stiffness_full.row_sums().into_iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        c.require(a_rows <= 1e-12, || format!("case {case}: stiffness row sum {a_rows}"));
        let s_cols = ops.s_full.col_sums().into_iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        c.require(s_cols <= 1e-12, || format!("case {case}: column sum {s_cols}"));
        let direct = diagnostics::advective_row_integrals(&mesh, &soil, &u).unwrap();
        let gap = ops.s_full.row_sums().iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        c.require(gap <= 1e-10, || format!("case {case}: advective row integral gap {gap}"));
    }
    c
}

/// `1 - (1 - x)^m` evaluated without cancellation.
fn one_minus_power(x: f64, m: f64) -> f64 {
    -(m * (-x).ln_1p()).exp_m1()
}

fn constitutive_limits() -> Check {
    let mut c = Check::default();
    let models = [
        (SoilKind::VanGenuchtenMualem, 0.0),
        (SoilKind::Gardner, 1.0),
        (SoilKind::BrooksCorey { b: 3.5 }, 0.0),
        (SoilKind::Haverkamp { a: 1.0, beta: 1.5, gamma: 4.0 }, 0.0),
    ];
    for ks in [0.1, 1.0, 10.0] {
        for (kind, factor) in models {
            let soil = SoilModel::new(kind, ks, 0.05, 2.0, 0.45, 0.05).unwrap();
            let limit = factor * ks;
            let gap = (soil.beta(1e-8) - limit).abs();
            c.require(gap <= 1e-6 * (1.0 + ks), || format!("{kind:?}, Ks={ks}: |beta - {limit}| = {gap}"));
        }
    }
    let s: f64 = 1e-7;
    for n in [1.5, 2.0, 3.0, 5.0] {
        let m = 1.0 - 1.0 / n;
        let reference = s.sqrt() * one_minus_power(s.powf(1.0 / m), m).powi(2);
        for value in [vgm_krel_taylor(1.0, m, s), vgm_krel(1.0, m, s)] {
            let rel = (value - reference).abs() / reference;
            c.require(rel <= 1e-9, || format!("n={n}: relative gap {rel}"));
        }
    }
    c
}

fn newton_behavior() -> Check {
    let mut c = Check::default();
    for b in builtins::BUILTINS {
        for r in diagnostics_of(b.name) {
            c.require(r.newton_iterations <= 2 && r.newton_residual <= 1e-6, || {
                format!("{} t={}: {} iterations, residual {}", b.name, r.t, r.newton_iterations, r.newton_residual)
            });
        }
    }
    c
}

fn determinism() -> Check {
    let mut c = Check::default();
    for b in builtins::BUILTINS {
        let first = diagnostics_csv_string(&diagnostics_of(b.name));
        let second = diagnostics_csv_string(&diagnostics_of(b.name));
        c.require(first == second, || format!("{}: CSV differs between runs", b.name));
    }
    let base = builtins::parse(builtins::find("sweep-test5").unwrap());
    let sweep = || run_sweep(&base, &[40, 80, 160, 400], None, None).unwrap();
    c.require(sweep() == sweep(), || "sweep rows differ between runs".into());
    c
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("implicit scheme keeps 0.2 <= theta <= 1 on the infiltration column", implicit_bounds),
        ("explicit scheme at tau=5 violates positivity within the expected band", explicit_violation),
        ("explicit scheme at tau=0.25 meets the step condition and stays bounded", explicit_verification),
        ("row sums and Peclet numbers guarantee both bounds on the linear profile", both_conditions),
        ("mesh refinement sweep of the advection-dominated column", advection_sweep),
        ("nonnegative inverse and explicit positivity on random acute meshes", positivity_properties),
        ("mass, partition-of-unity and advective row-sum identities", algebraic_identities),
        ("dry-end limits of the advective ratio and the small-saturation expansion", constitutive_limits),
        ("Newton converges in at most two iterations", newton_behavior),
        ("builtin runs are bitwise repeatable", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        if result.failures.is_empty() {
            println!("PASS criterion {:>2}: {name} ({secs:.2} s)", i + 1);
        } else {
            failed += 1;
            println!("FAIL criterion {:>2}: {name} ({secs:.2} s)", i + 1);
            for f in result.failures.iter().take(8) {
                println!("    {f}");
            }
            if result.failures.len() > 8 {
                println!("    ... {} more", result.failures.len() - 8);
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var("RICHARDS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
