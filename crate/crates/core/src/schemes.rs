//! Time stepping: the explicit-gravity and the linearly implicit scheme,
//! both solved for the interior unknowns with Newton's method.

use crate::assembly::{self, AssembledOperators, AssemblyError};
use crate::constitutive::{ConstitutiveError, SoilModel};
use crate::diagnostics::{self, StepDiagnostics};
use crate::mesh::Mesh;
use crate::sparse::{self, SparseError, SparseMatrix};
use thiserror::Error;

pub const NEWTON_TOL: f64 = 1e-6;
pub const NEWTON_MAX_ITER: usize = 100;
pub const ADAPTIVE_SAFETY: f64 = 0.9;
/// Adaptive stepping gives up once `tau_crit` falls below this fraction of
/// the nominal step.
pub const STALL_FRACTION: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
    #[error("Newton did not converge in {} iterations (residual {:e})", .0.iterations, .0.final_residual)]
    NewtonNotConverged(NewtonReport),
    #[error("Newton produced a non-finite iterate after {0} iterations")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("adaptive step collapsed at t = {t}: tau_crit = {tau_crit:e}")]
    StepCollapse { t: f64, tau_crit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ExplicitGravity,
    LinearlyImplicit,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExplicitGravity => "explicit",
            Scheme::LinearlyImplicit => "implicit",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" | "explicit-gravity" | "explicit_gravity" => Some(Scheme::ExplicitGravity),
            "implicit" | "linearly-implicit" | "linearly_implicit" => Some(Scheme::LinearlyImplicit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    /// nominal time step
    pub tau: f64,
    pub t_final: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// explicit scheme only: `tau_n = min(tau, safety * tau_crit)`
    pub adaptive: bool,
    pub adaptive_safety: f64,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, tau: f64, t_final: f64) -> SchemeConfig {
        SchemeConfig {
            scheme,
            tau,
            t_final,
            newton_tol: NEWTON_TOL,
            newton_max_iter: NEWTON_MAX_ITER,
            adaptive: false,
            adaptive_safety: ADAPTIVE_SAFETY,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: &str| Err(SolverError::InvalidConfig(m.to_string()));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive");
        }
        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad("final time must be positive");
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return bad("Newton tolerance and iteration cap must be positive");
        }
        if !(self.adaptive_safety > 0.0 && self.adaptive_safety < 1.0) {
            return bad("adaptive safety factor must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Nodal values of `u` on all mesh vertices at time `time`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// Newton's method with the infinity-norm residual as stopping test.
///
/// The initial guess counts as iteration 0; a guess that already satisfies
/// the tolerance returns with zero iterations.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    x0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, NewtonReport), SolverError>
where
    R: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> SparseMatrix,
{
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut res = norm_inf(&r);
    let mut it = 0;
    while res > tol {
        if it == max_iter {
            return Err(SolverError::NewtonNotConverged(NewtonReport {
                iterations: it,
                final_residual: res,
                converged: false,
            }));
        }
        let dx = sparse::solve(&jacobian(&x), &r)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi -= d;
        }
        it += 1;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite(it));
        }
        r = residual(&x);
        res = norm_inf(&r);
    }
    Ok((x, NewtonReport { iterations: it, final_residual: res, converged: true }))
}

/// Interior matrix and right-hand side of the linear part of a scheme.
fn linear_part(mesh: &Mesh, ops: &AssembledOperators, scheme: Scheme, boundary_u: &[f64]) -> (SparseMatrix, Vec<f64>) {
    let interior = mesh.interior_nodes();
    match scheme {
        Scheme::ExplicitGravity => (ops.stiffness_full.submatrix(interior, interior), ops.gravity_load_tilde()),
        Scheme::LinearlyImplicit => (
            ops.s_full.submatrix(interior, interior),
            assembly::dirichlet_lift(mesh, &ops.s_full, boundary_u),
        ),
    }
}

/// One step from already assembled operators. `boundary_u` holds the
/// Dirichlet data at the new time, ordered like `mesh.boundary_nodes()`.
#[allow(clippy::too_many_arguments)]
pub fn step_with_operators(
    mesh: &Mesh,
    model: &SoilModel,
    scheme: Scheme,
    ops: &AssembledOperators,
    prev: &State,
    tau: f64,
    boundary_u: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(State, NewtonReport), SolverError> {
    let interior = mesh.interior_nodes();
    let mass = ops.interior_mass(mesh);
    let (s, b) = linear_part(mesh, ops, scheme, boundary_u);
    let u0 = assembly::restrict(mesh, &prev.u);
    let theta0: Vec<f64> = u0.iter().map(|&u| model.theta(u)).collect();

    let residual = |x: &[f64]| -> Vec<f64> {
        let su = s.matvec(x);
        (0..x.len())
            .map(|i| mass[i] * (model.theta(x[i]) - theta0[i]) / tau + su[i] - b[i])
            .collect()
    };
    let jacobian = |x: &[f64]| -> SparseMatrix {
        let d: Vec<f64> = x.iter().zip(&mass).map(|(&u, &m)| m * model.theta_prime(u) / tau).collect();
        s.with_added_diagonal(&d).expect("diagonal length matches interior size")
    };
    let (x, report) = newton_solve(residual, jacobian, &u0, tol, max_iter)?;

    let mut u = prev.u.clone();
    for (&v, &val) in interior.iter().zip(&x) {
        u[v] = val;
    }
    for (&v, &val) in mesh.boundary_nodes().iter().zip(boundary_u) {
        u[v] = val;
    }
    Ok((State { time: prev.time + tau, u }, report))
}

#[allow(clippy::too_many_arguments)]
fn step(
    mesh: &Mesh,
    model: &SoilModel,
    scheme: Scheme,
    prev: &State,
    tau: f64,
    boundary_u: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(State, NewtonReport), SolverError> {
    let ops = AssembledOperators::assemble(mesh, model, &prev.u, boundary_u)?;
    step_with_operators(mesh, model, scheme, &ops, prev, tau, boundary_u, tol, max_iter)
}

/// One step with gravity taken from the previous state.
pub fn step_explicit_gravity(
    mesh: &Mesh,
    model: &SoilModel,
    prev: &State,
    tau: f64,
    boundary_u: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(State, NewtonReport), SolverError> {
    step(mesh, model, Scheme::ExplicitGravity, prev, tau, boundary_u, tol, max_iter)
}

/// One step with advection `beta(u_prev) u` treated implicitly.
pub fn step_linearly_implicit(
    mesh: &Mesh,
    model: &SoilModel,
    prev: &State,
    tau: f64,
    boundary_u: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(State, NewtonReport), SolverError> {
    step(mesh, model, Scheme::LinearlyImplicit, prev, tau, boundary_u, tol, max_iter)
}

/// Outcome of one time step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub state: State,
    pub diagnostics: StepDiagnostics,
    pub newton: NewtonReport,
}

/// Lazily advancing simulation; yields one record per step and stops after
/// the first error.
pub struct Simulation<'a> {
    mesh: &'a Mesh,
    model: &'a SoilModel,
    config: SchemeConfig,
    dirichlet: Vec<f64>,
    state: State,
    t0: f64,
    steps_taken: usize,
    finished: bool,
}

impl<'a> Simulation<'a> {
    /// The boundary entries of `initial` are overwritten with `dirichlet`.
    pub fn new(
        mesh: &'a Mesh,
        model: &'a SoilModel,
        config: SchemeConfig,
        mut initial: State,
        dirichlet: &[f64],
    ) -> Result<Simulation<'a>, SolverError> {
        config.validate()?;
        if initial.u.len() != mesh.n_vertices() {
            return Err(AssemblyError::StateLength { expected: mesh.n_vertices(), got: initial.u.len() }.into());
        }
        if dirichlet.len() != mesh.boundary_nodes().len() {
            return Err(AssemblyError::BoundaryLength { expected: mesh.boundary_nodes().len(), got: dirichlet.len() }.into());
        }
        for (&v, &val) in mesh.boundary_nodes().iter().zip(dirichlet) {
            initial.u[v] = val;
        }
        Ok(Simulation {
            mesh,
            model,
            config,
            dirichlet: dirichlet.to_vec(),
            t0: initial.time,
            state: initial,
            steps_taken: 0,
            finished: false,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    fn t_end(&self) -> f64 {
        self.t0 + self.config.t_final
    }

    /// Next uniform step, or `None` once the final time is reached. Times are
    /// computed as `t0 + n tau` so that rounding does not accumulate.
    fn uniform_step(&self) -> Option<f64> {
        let n_total = (self.config.t_final / self.config.tau - 1e-9).ceil().max(0.0) as usize;
        if self.steps_taken >= n_total {
            return None;
        }
        let t_prev = self.t0 + self.steps_taken as f64 * self.config.tau;
        let t_next = (self.t0 + (self.steps_taken + 1) as f64 * self.config.tau).min(self.t_end());
        Some(t_next - t_prev)
    }

    fn advance(&mut self) -> Result<Option<StepRecord>, SolverError> {
        let (mesh, model) = (self.mesh, self.model);
        let adaptive = self.config.adaptive && self.config.scheme == Scheme::ExplicitGravity;
        let remaining = self.t_end() - self.state.time;
        if adaptive && remaining <= 1e-12 * self.config.tau.max(self.t_end().abs()) {
            return Ok(None);
        }
        if !adaptive && self.uniform_step().is_none() {
            return Ok(None);
        }

        let u_prev = &self.state.u;
        let ops = AssembledOperators::assemble(mesh, model, u_prev, &self.dirichlet)?;
        let mass = ops.interior_mass(mesh);
        let theta_prev: Vec<f64> = assembly::restrict(mesh, u_prev).iter().map(|&u| model.theta(u)).collect();
        let g_tilde = ops.gravity_load_tilde();
        let tau_crit = diagnostics::critical_timestep(&mass, &theta_prev, &g_tilde);

        let tau = if adaptive {
            if tau_crit < STALL_FRACTION * self.config.tau {
                return Err(SolverError::StepCollapse { t: self.state.time, tau_crit });
            }
            let tau = self.config.tau.min(self.config.adaptive_safety * tau_crit);
            if tau >= remaining { remaining } else { tau }
        } else {
            self.uniform_step().expect("checked above")
        };

        let margins = diagnostics::nodal_margins(&mass, &theta_prev, &g_tilde, tau);
        let tau_crit_g = diagnostics::critical_timestep(&mass, &theta_prev, &ops.gravity_load);
        let margins_g = diagnostics::nodal_margins(&mass, &theta_prev, &ops.gravity_load, tau);
        let (_, rowsum_min) = diagnostics::interior_row_sums(&ops.s_full, mesh.interior_nodes());
        let peclet = diagnostics::peclet_check(mesh, model, u_prev)?;
        let upper = diagnostics::upper_bound(mesh, model, u_prev, &self.dirichlet);

        let (mut next, newton) = step_with_operators(
            mesh,
            model,
            self.config.scheme,
            &ops,
            &self.state,
            tau,
            &self.dirichlet,
            self.config.newton_tol,
            self.config.newton_max_iter,
        )?;
        self.steps_taken += 1;
        if !adaptive {
            next.time = self.t0 + (self.steps_taken as f64 * self.config.tau).min(self.config.t_final);
        }
        let (theta_min, theta_max) = diagnostics::saturation_bounds(mesh, model, &next.u);
        // the explicit positivity condition, reported for either scheme
        let condition_met = tau < tau_crit && margins.mu_min > 0.0;
        let (theta_min_all, theta_max_all) = diagnostics::saturation_bounds_all(model, &next.u);
        let diag = StepDiagnostics {
            t: next.time,
            tau,
            tau_crit,
            mu_min: margins.mu_min,
            n_margin_violations: margins.violations,
            tau_crit_g,
            mu_min_g: margins_g.mu_min,
            n_margin_violations_g: margins_g.violations,
            rowsum_min,
            peclet_max: peclet.pe_max,
            peclet_ok: peclet.condition_ok,
            theta_min,
            theta_max,
            theta_min_all,
            theta_max_all,
            upper_bound_m: upper,
            condition_met,
            newton_iterations: newton.iterations,
            newton_residual: newton.final_residual,
        };
        self.state = next.clone();
        Ok(Some(StepRecord { state: next, diagnostics: diag, newton }))
    }
}

impl Iterator for Simulation<'_> {
    type Item = Result<StepRecord, SolverError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        match self.advance() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.finished = true;
                None
            }
            Err(e) => {
                self.finished = true;
                Some(Err(e))
            }
        }
    }
}

/// Runs to the final time and returns every step record; the first failing
/// step aborts the run.
pub fn run_simulation(
    mesh: &Mesh,
    model: &SoilModel,
    config: &SchemeConfig,
    initial: State,
    dirichlet: &[f64],
) -> Result<Vec<StepRecord>, SolverError> {
    Simulation::new(mesh, model, config.clone(), initial, dirichlet)?.collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::SaturationCore;
    use crate::mesh::{build_interval_mesh, build_rect_mesh, Side};

    fn vgm() -> SoilModel {
        SoilModel::van_genuchten(5.0, 0.05, 2.0, 0.45, 0.05).unwrap()
    }

    #[test]
    fn newton_scalar_cubic() {
        // x^3 = 8 from x0 = 3
        let (x, rep) = newton_solve(
            |x| vec![x[0].powi(3) - 8.0],
            |x| SparseMatrix::assemble(1, &[(0, 0, 3.0 * x[0] * x[0])]).unwrap(),
            &[3.0],
            1e-12,
            50,
        )
        .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!(rep.converged && rep.iterations > 1 && rep.iterations < 10);
    }

    #[test]
    fn newton_reports_failure() {
        let err = newton_solve(
            |x| vec![x[0].powi(3) - 8.0],
            |x| SparseMatrix::assemble(1, &[(0, 0, 3.0 * x[0] * x[0])]).unwrap(),
            &[3.0],
            1e-12,
            1,
        )
        .unwrap_err();
        match err {
            SolverError::NewtonNotConverged(r) => {
                assert_eq!(r.iterations, 1);
                assert!(r.final_residual > 1e-12);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn affine_theta_converges_in_one_iteration() {
        let soil = vgm();
        let mesh = build_rect_mesh(10.0, 10.0, 4, 4, &[Side::Bottom, Side::Top].into_iter().collect()).unwrap();
        let mut u: Vec<f64> = (0..mesh.n_vertices()).map(|v| 0.2 + 0.06 * mesh.height(v)).collect();
        let bc: Vec<f64> = mesh.boundary_nodes().iter().map(|&v| u[v]).collect();
        u[12] += 0.1;
        let prev = State { time: 0.0, u };
        for scheme in [Scheme::ExplicitGravity, Scheme::LinearlyImplicit] {
            let (_, rep) = step(&mesh, &soil, scheme, &prev, 0.5, &bc, 1e-10, 100).unwrap();
            assert_eq!(rep.iterations, 1, "{scheme:?}");
        }
    }

    #[test]
    fn power_core_needs_several_iterations() {
        let soil = vgm().with_core(SaturationCore::Power { exponent: 2.0 }).unwrap();
        let mesh = build_interval_mesh(10.0, 11).unwrap();
        let u: Vec<f64> = (0..11).map(|i| if i < 5 { 0.9 } else { 0.3 }).collect();
        let bc = vec![0.9, 0.3];
        let prev = State { time: 0.0, u };
        let (next, rep) = step_linearly_implicit(&mesh, &soil, &prev, 1.0, &bc, 1e-10, 100).unwrap();
        assert!(rep.converged && rep.iterations > 1);
        // converged residual of the discrete system is small
        let ops = AssembledOperators::assemble(&mesh, &soil, &prev.u, &bc).unwrap();
        let (s, b) = linear_part(&mesh, &ops, Scheme::LinearlyImplicit, &bc);
        let m = ops.interior_mass(&mesh);
        let x = assembly::restrict(&mesh, &next.u);
        let x0 = assembly::restrict(&mesh, &prev.u);
        let sx = s.matvec(&x);
        for i in 0..x.len() {
            let r = m[i] * (soil.theta(x[i]) - soil.theta(x0[i])) + sx[i] - b[i];
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn hydrostatic_free_drainage_is_stationary() {
        // uniform state with constant coefficients: gravity flux is divergence
        // free, so nothing moves
        let soil = vgm();
        let mesh = build_rect_mesh(10.0, 20.0, 3, 6, &[Side::Bottom, Side::Top].into_iter().collect()).unwrap();
        let u = vec![0.4; mesh.n_vertices()];
        let bc = vec![0.4; mesh.boundary_nodes().len()];
        for scheme in [Scheme::ExplicitGravity, Scheme::LinearlyImplicit] {
            let cfg = SchemeConfig::new(scheme, 1.0, 3.0);
            let recs = run_simulation(&mesh, &soil, &cfg, State { time: 0.0, u: u.clone() }, &bc).unwrap();
            assert_eq!(recs.len(), 3);
            for r in &recs {
                for &v in &r.state.u {
                    assert!((v - 0.4).abs() < 1e-9, "{scheme:?}");
                }
            }
        }
    }

    #[test]
    fn implicit_advection_matches_explicit_load_form() {
        // with beta u = Kbar(u) the implicit term at the lagged state equals
        // minus the gravity load: S u_prev restricted to interior rows equals
        // A u_prev - G over those rows
        let soil = vgm();
        let mesh = build_rect_mesh(10.0, 20.0, 4, 6, &[Side::Bottom].into_iter().collect()).unwrap();
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|v| 0.2 + 0.03 * mesh.height(v)).collect();
        let bc: Vec<f64> = mesh.boundary_nodes().iter().map(|&v| u[v]).collect();
        let ops = AssembledOperators::assemble(&mesh, &soil, &u, &bc).unwrap();
        let cu = ops.advection_full.matvec(&u);
        for (k, &i) in mesh.interior_nodes().iter().enumerate() {
            assert!((cu[i] + ops.gravity_load[k]).abs() < 1e-12, "node {i}");
        }
    }

    #[test]
    fn uniform_schedule_hits_final_time() {
        let soil = vgm();
        let mesh = build_interval_mesh(10.0, 6).unwrap();
        let u = vec![0.5; 6];
        let cfg = SchemeConfig::new(Scheme::LinearlyImplicit, 0.3, 1.0);
        let recs = run_simulation(&mesh, &soil, &cfg, State { time: 0.0, u }, &[0.5, 0.5]).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs.last().unwrap().state.time, 1.0);
        assert!((recs.last().unwrap().diagnostics.tau - 0.1).abs() < 1e-12);
    }

    #[test]
    fn adaptive_respects_critical_step() {
        let soil = vgm();
        let mesh = build_rect_mesh(50.0, 200.0, 5, 10, &[Side::Bottom, Side::Top].into_iter().collect()).unwrap();
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|v| if mesh.height(v) < 60.0 { 1.0 } else { 0.2 }).collect();
        let bc: Vec<f64> = mesh.boundary_nodes().iter().map(|&v| u[v]).collect();
        let mut cfg = SchemeConfig::new(Scheme::ExplicitGravity, 100.0, 50.0);
        cfg.adaptive = true;
        let recs = run_simulation(&mesh, &soil, &cfg, State { time: 0.0, u }, &bc).unwrap();
        assert!((recs.last().unwrap().state.time - 50.0).abs() < 1e-9);
        for r in &recs {
            assert!(r.diagnostics.tau <= ADAPTIVE_SAFETY * r.diagnostics.tau_crit + 1e-12);
            assert!(r.diagnostics.condition_met);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let mesh = build_interval_mesh(1.0, 3).unwrap();
        let cfg = SchemeConfig::new(Scheme::ExplicitGravity, 0.0, 1.0);
        assert!(matches!(
            Simulation::new(&mesh, &vgm(), cfg, State { time: 0.0, u: vec![0.5; 3] }, &[0.5, 0.5]),
            Err(SolverError::InvalidConfig(_))
        ));
    }
}
