//! Scenario runs, the refinement sweep and the mesh check.

use crate::config::{ConfigError, GeometryConfig, ScenarioConfig};
use crate::output::{self, DiagnosticsCsv};
use crate::scenario::Scenario;
use richards_core::diagnostics::{self, format_real};
use richards_core::mesh::{check_weakly_acute, WEAKLY_ACUTE_TOL};
use richards_core::schemes::{Simulation, SolverError, State, StepRecord};
use richards_core::StepDiagnostics;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("solver failed at t = {t}: {source}")]
    Solver { t: f64, source: SolverError },
}

impl RunError {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Io { .. } | RunError::Solver { .. } => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// Diagnostics of a finished or aborted run.
#[derive(Debug)]
pub struct Outcome {
    pub diagnostics: Vec<StepDiagnostics>,
    pub final_state: State,
    pub error: Option<SolverError>,
}

/// Runs a scenario in memory, calling `observe` after every step.
pub fn simulate(s: &Scenario, mut observe: impl FnMut(&StepRecord)) -> Result<Outcome, SolverError> {
    let mut sim = Simulation::new(&s.mesh, &s.model, s.scheme.clone(), s.initial.clone(), &s.dirichlet)?;
    let mut diags = Vec::new();
    let mut error = None;
    for rec in sim.by_ref() {
        match rec {
            Ok(r) => {
                observe(&r);
                diags.push(r.diagnostics);
            }
            Err(e) => error = Some(e),
        }
    }
    Ok(Outcome { diagnostics: diags, final_state: sim.state().clone(), error })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// overrides `[output] vtk_every`
    pub vtk_every: Option<usize>,
}

/// Paths written by [`run_scenario`].
#[derive(Debug, Clone)]
pub struct RunFiles {
    pub csv: PathBuf,
    pub profile: PathBuf,
    pub vtk: Vec<PathBuf>,
    pub steps: usize,
}

/// Runs a scenario and writes the diagnostics CSV, the final saturation
/// profile and optional VTK snapshots. On a solver failure the CSV already
/// holds every completed step.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunFiles, RunError> {
    let cfg = &s.config;
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv = dir.join(cfg.output.csv.clone().unwrap_or_else(|| format!("{}.csv", cfg.name)));
    let profile = dir.join(cfg.output.profile.clone().unwrap_or_else(|| format!("{}_profile.csv", cfg.name)));
    let every = opts.vtk_every.unwrap_or(cfg.output.vtk_every);

    let vtk_path = |step: usize| dir.join(format!("{}_{step:04}.vtk", cfg.name));
    let mut vtk = Vec::new();
    if every > 0 {
        let p = vtk_path(0);
        output::write_vtk_file(&p, &s.mesh, &s.model, &s.initial.u, s.initial.time).map_err(io_err(&p))?;
        vtk.push(p);
    }

    let mut writer = DiagnosticsCsv::create(&csv).map_err(io_err(&csv))?;
    let mut io_failure: Option<RunError> = None;
    let mut step = 0;
    let outcome = simulate(s, |rec| {
        step += 1;
        if io_failure.is_some() {
            return;
        }
        if let Err(e) = writer.write(&rec.diagnostics) {
            io_failure = Some(io_err(&csv)(e));
            return;
        }
        if every > 0 && step % every == 0 {
            let p = vtk_path(step);
            match output::write_vtk_file(&p, &s.mesh, &s.model, &rec.state.u, rec.state.time) {
                Ok(()) => vtk.push(p),
                Err(e) => io_failure = Some(io_err(&p)(e)),
            }
        }
    })
    .map_err(|source| RunError::Solver { t: s.initial.time, source })?;
    if let Some(e) = io_failure {
        return Err(e);
    }

    let x0 = cfg.output.profile_x.unwrap_or(match cfg.geometry {
        GeometryConfig::Rect { length, .. } => 0.5 * length,
        GeometryConfig::Interval { .. } => 0.0,
    });
    let prof = output::vertical_profile(&s.mesh, &s.model, &outcome.final_state.u, x0);
    output::write_profile(&profile, &prof).map_err(io_err(&profile))?;

    if let Some(source) = outcome.error {
        return Err(RunError::Solver { t: outcome.final_state.time, source });
    }
    Ok(RunFiles { csv, profile, vtk, steps: outcome.diagnostics.len() })
}

/// One row of the refinement sweep; extrema are over all steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub h_eff: f64,
    pub pe_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub max_principle: bool,
    pub error: Option<String>,
}

pub const SWEEP_HEADER: &str = "N,h_eff,pe_max,theta_min,theta_max,max_principle,status";

impl SweepRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.n,
            format_real(self.h_eff),
            format_real(self.pe_max),
            format_real(self.theta_min),
            format_real(self.theta_max),
            self.max_principle,
            self.error.as_deref().map_or("ok".to_string(), |e| format!("\"failed: {}\"", e.replace('"', "'"))),
        )
    }
}

fn sweep_one(base: &ScenarioConfig, n: usize, tau: Option<f64>, scheme: Option<richards_core::Scheme>) -> SweepRow {
    let GeometryConfig::Interval { height, .. } = base.geometry else {
        unreachable!("checked by run_sweep")
    };
    let mut cfg = base.clone();
    cfg.geometry = GeometryConfig::Interval { height, points: n };
    let h_eff = height / (n as f64 - 1.0);
    let failed = |e: String| SweepRow {
        n,
        h_eff,
        pe_max: f64::NAN,
        theta_min: f64::NAN,
        theta_max: f64::NAN,
        max_principle: false,
        error: Some(e),
    };
    let scenario = match Scenario::build(&cfg).and_then(|s| s.with_overrides(tau, scheme)) {
        Ok(s) => s,
        Err(e) => return failed(e.to_string()),
    };
    let outcome = match simulate(&scenario, |_| {}) {
        Ok(o) => o,
        Err(e) => return failed(e.to_string()),
    };
    let d = &outcome.diagnostics;
    let pe_max = d.iter().map(|r| r.peclet_max).fold(f64::NEG_INFINITY, f64::max);
    let theta_min = d.iter().map(|r| r.theta_min).fold(f64::INFINITY, f64::min);
    let theta_max = d.iter().map(|r| r.theta_max).fold(f64::NEG_INFINITY, f64::max);
    SweepRow {
        n,
        h_eff,
        pe_max,
        theta_min,
        theta_max,
        max_principle: theta_min >= -1e-10 && theta_max <= 1.0 + 1e-10,
        error: outcome.error.map(|e| e.to_string()),
    }
}

/// Runs the base 1D scenario once per point count, concurrently. Failed
/// meshes are reported in their row and do not stop the others.
pub fn run_sweep(
    base: &ScenarioConfig,
    meshes: &[usize],
    tau: Option<f64>,
    scheme: Option<richards_core::Scheme>,
) -> Result<Vec<SweepRow>, ConfigError> {
    if !matches!(base.geometry, GeometryConfig::Interval { .. }) {
        return Err(ConfigError::Semantic { msg: "the sweep needs an interval geometry".into() });
    }
    if meshes.is_empty() {
        return Err(ConfigError::Semantic { msg: "empty mesh list".into() });
    }
    if let Some(&n) = meshes.iter().find(|&&n| n < 3) {
        return Err(ConfigError::Semantic { msg: format!("mesh with {n} points is too small") });
    }
    Ok(std::thread::scope(|scope| {
        let handles: Vec<_> = meshes.iter().map(|&n| scope.spawn(move || sweep_one(base, n, tau, scheme))).collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    }))
}

pub fn write_sweep_csv<W: Write>(out: &mut W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.to_csv_row())?;
    }
    Ok(())
}

/// Mesh quality and Peclet check on the initial state.
#[derive(Debug, Clone)]
pub struct MeshCheck {
    pub n_vertices: usize,
    pub n_elements: usize,
    pub weakly_acute: bool,
    pub acute_violations: usize,
    pub worst_dot: f64,
    pub peclet_ok: bool,
    pub peclet_max: f64,
    pub peclet_failing_elements: usize,
}

pub fn check_mesh(s: &Scenario) -> Result<MeshCheck, SolverError> {
    let acute = check_weakly_acute(&s.mesh, WEAKLY_ACUTE_TOL);
    let mut u = s.initial.u.clone();
    for (&v, &val) in s.mesh.boundary_nodes().iter().zip(&s.dirichlet) {
        u[v] = val;
    }
    let pe = diagnostics::peclet_check(&s.mesh, &s.model, &u)?;
    Ok(MeshCheck {
        n_vertices: s.mesh.n_vertices(),
        n_elements: s.mesh.n_elements(),
        weakly_acute: acute.passed,
        acute_violations: acute.violations.len(),
        worst_dot: acute.violations.iter().map(|v| v.dot).fold(f64::NEG_INFINITY, f64::max),
        peclet_ok: pe.condition_ok,
        peclet_max: pe.pe_max,
        peclet_failing_elements: pe.elements.iter().filter(|e| e.slack < -diagnostics::PECLET_TOL).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn small_test5() -> ScenarioConfig {
        let mut cfg = builtins::load("test5").unwrap();
        cfg.scheme.t_final = 2.0;
        cfg
    }

    #[test]
    fn writes_csv_and_profile() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::build(&small_test5()).unwrap();
        let files = run_scenario(&s, &RunOptions { out_dir: dir.path().into(), vtk_every: Some(1) }).unwrap();
        assert_eq!(files.steps, 2);
        assert_eq!(files.vtk.len(), 3);
        let csv = std::fs::read_to_string(&files.csv).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("t,tau_crit,mu_min,n_margin_violations,rowsum_min,peclet_max,peclet_ok,"));
        let prof = std::fs::read_to_string(&files.profile).unwrap();
        assert_eq!(prof.lines().count(), 41);
    }

    #[test]
    fn solver_failure_keeps_partial_csv() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_test5();
        cfg.scheme.t_final = 3.0;
        cfg.scheme.newton_max_iter = 1;
        cfg.soil.core_exponent = Some(2.0);
        let s = Scenario::build(&cfg).unwrap();
        let err = run_scenario(&s, &RunOptions { out_dir: dir.path().into(), vtk_every: None }).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let csv = std::fs::read_to_string(dir.path().join("test5.csv")).unwrap();
        assert!(csv.lines().count() >= 1);
    }

    #[test]
    fn sweep_rejects_rect_and_marks_rows() {
        let rect = builtins::load("test3").unwrap();
        assert!(run_sweep(&rect, &[40], None, None).is_err());
        let rows = run_sweep(&small_test5(), &[20, 40], None, None).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![20, 40]);
        assert!(rows.iter().all(|r| r.error.is_none()));
        assert!((rows[0].h_eff - 200.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn check_mesh_on_builtins() {
        let s = Scenario::build(&builtins::load("test3").unwrap()).unwrap();
        let c = check_mesh(&s).unwrap();
        assert!(c.weakly_acute);
        assert_eq!(c.n_vertices, 21 * 41);
        let s = Scenario::build(&builtins::load("test5").unwrap()).unwrap();
        assert!(!check_mesh(&s).unwrap().peclet_ok);
    }
}
