//! Per-step algebraic checks behind the discrete minimum and maximum
//! principles.
//!
//! Everything here is evaluated on the lagged state `U^{n-1}` except the
//! saturation bounds, which describe the new state.

use crate::assembly::{self, AssemblyError};
use crate::constitutive::{ConstitutiveError, SoilModel};
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;
use std::fmt::Write as _;

/// Slack used when testing the elementwise Peclet inequality.
pub const PECLET_TOL: f64 = 1e-12;

/// Fixed CSV column order for [`StepDiagnostics`].
pub const CSV_COLUMNS: [&str; 19] = [
    "t",
    "tau_crit",
    "mu_min",
    "n_margin_violations",
    "rowsum_min",
    "peclet_max",
    "peclet_ok",
    "theta_min",
    "theta_max",
    "M",
    "condition_met",
    "tau",
    "tau_crit_G",
    "mu_min_G",
    "n_margin_violations_G",
    "newton_iterations",
    "newton_residual",
    "theta_min_all",
    "theta_max_all",
];

/// One row of the per-step diagnostics table.
///
/// `tau_crit`, `mu_min` and `condition_met` use the boundary-lifted load
/// `G~`; the `_g` variants use the plain gravity load `G`. `theta_min` and
/// `theta_max` range over interior nodes, the `_all` variants also over the
/// Dirichlet nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub tau: f64,
    pub tau_crit: f64,
    pub mu_min: f64,
    pub n_margin_violations: usize,
    pub tau_crit_g: f64,
    pub mu_min_g: f64,
    pub n_margin_violations_g: usize,
    pub rowsum_min: f64,
    pub peclet_max: f64,
    pub peclet_ok: bool,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_min_all: f64,
    pub theta_max_all: f64,
    pub upper_bound_m: f64,
    pub condition_met: bool,
    pub newton_iterations: usize,
    pub newton_residual: f64,
}

/// 17 significant digits; `inf`/`-inf`/`nan` spelled out.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

impl StepDiagnostics {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            format_real(self.t),
            format_real(self.tau_crit),
            format_real(self.mu_min),
            self.n_margin_violations,
            format_real(self.rowsum_min),
            format_real(self.peclet_max),
            self.peclet_ok,
            format_real(self.theta_min),
            format_real(self.theta_max),
            format_real(self.upper_bound_m),
            self.condition_met,
            format_real(self.tau),
            format_real(self.tau_crit_g),
            format_real(self.mu_min_g),
            self.n_margin_violations_g,
            self.newton_iterations,
            format_real(self.newton_residual),
            format_real(self.theta_min_all),
            format_real(self.theta_max_all),
        );
        s
    }
}

/// `min over {i : g_i < 0} of max(0, m_i theta_i / |g_i|)`; `+inf` when no
/// load is negative. A non-positive saturation at an adverse node gives 0.
pub fn critical_timestep(mass: &[f64], theta_prev: &[f64], load: &[f64]) -> f64 {
    assert!(mass.len() == theta_prev.len() && mass.len() == load.len(), "length mismatch");
    mass.iter()
        .zip(theta_prev)
        .zip(load)
        .filter(|(_, &g)| g < 0.0)
        .map(|((&m, &th), &g)| (m * th / g.abs()).max(0.0))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Margins {
    pub mu: Vec<f64>,
    pub mu_min: f64,
    pub violations: usize,
}

/// Nodal margins `mu_i = m_i theta_i + tau g_i`.
pub fn nodal_margins(mass: &[f64], theta_prev: &[f64], load: &[f64], tau: f64) -> Margins {
    assert!(mass.len() == theta_prev.len() && mass.len() == load.len(), "length mismatch");
    let mu: Vec<f64> = mass.iter().zip(theta_prev).zip(load).map(|((&m, &th), &g)| m * th + tau * g).collect();
    let mu_min = mu.iter().copied().fold(f64::INFINITY, f64::min);
    let violations = mu.iter().filter(|&&v| v < 0.0).count();
    Margins { mu, mu_min, violations }
}

/// Row sums over all columns for the rows listed in `interior`, and their minimum.
pub fn interior_row_sums(s_full: &SparseMatrix, interior: &[usize]) -> (Vec<f64>, f64) {
    let sums: Vec<f64> = interior.iter().map(|&i| s_full.row(i).map(|(_, v)| v).sum()).collect();
    let min = sums.iter().copied().fold(f64::INFINITY, f64::min);
    (sums, min)
}

/// Directly assembled `int beta(u_prev) e_z . grad phi_i` over all nodes,
/// the value every full row sum of `A + C` must reproduce.
pub fn advective_row_integrals(mesh: &Mesh, model: &SoilModel, u_prev: &[f64]) -> Result<Vec<f64>, AssemblyError> {
    assembly::vertical_flux_integrals(mesh, &assembly::nodal_beta(model, u_prev))
}

/// Per-element outcome of the Peclet inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementPeclet {
    pub element: usize,
    /// `h_T * max_T rho`
    pub pe: f64,
    /// local vertex with the smallest slack
    pub worst_vertex: usize,
    /// `min_{j != i}(-grad phi_i . grad phi_j) - rho_sup (e_z . grad phi_i)^+`
    /// at the worst vertex; negative means the inequality fails there
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PecletReport {
    pub pe_max: f64,
    pub condition_ok: bool,
    pub elements: Vec<ElementPeclet>,
}

/// Local Peclet condition with `sup_T rho` taken as the maximum over the
/// element vertices (states clamped at zero, as for `beta`).
pub fn peclet_check(mesh: &Mesh, model: &SoilModel, u_prev: &[f64]) -> Result<PecletReport, ConstitutiveError> {
    let rho: Vec<f64> = u_prev.iter().map(|&u| model.peclet_ratio(u.max(0.0))).collect::<Result<_, _>>()?;
    let dim = mesh.dim();
    let mut elements = Vec::with_capacity(mesh.n_elements());
    let mut pe_max = 0.0f64;
    let mut ok = true;
    for e in 0..mesh.n_elements() {
        let geo = mesh.element_geometry(e).expect("mesh elements validated at construction");
        let conn = mesh.element(e);
        let rho_sup = conn.iter().map(|&v| rho[v]).fold(0.0f64, f64::max);
        let mut worst = (0, f64::INFINITY);
        for i in 0..geo.n_local() {
            let rhs = (0..geo.n_local())
                .filter(|&j| j != i)
                .map(|j| -geo.grad_dot(i, j))
                .fold(f64::INFINITY, f64::min);
            let lhs = rho_sup * geo.vertical_gradient(i, dim).max(0.0);
            let slack = rhs - lhs;
            if slack < worst.1 {
                worst = (i, slack);
            }
            if lhs > rhs + PECLET_TOL {
                ok = false;
            }
        }
        let pe = geo.diameter * rho_sup;
        pe_max = pe_max.max(pe);
        elements.push(ElementPeclet { element: e, pe, worst_vertex: worst.0, slack: worst.1 });
    }
    Ok(PecletReport { pe_max, condition_ok: ok, elements })
}

/// Minimum and maximum of `theta(u)` over the interior nodes.
pub fn saturation_bounds(mesh: &Mesh, model: &SoilModel, u: &[f64]) -> (f64, f64) {
    mesh.interior_nodes()
        .iter()
        .map(|&v| model.theta(u[v]))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
}

/// Minimum and maximum of `theta(u)` over every node.
pub fn saturation_bounds_all(model: &SoilModel, u: &[f64]) -> (f64, f64) {
    u.iter()
        .map(|&v| model.theta(v))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| (lo.min(t), hi.max(t)))
}

/// Dynamic upper bound `M^{n-1}`: the larger of the interior maximum of the
/// previous saturation and the maximum of the Dirichlet data at the new time.
pub fn upper_bound(mesh: &Mesh, model: &SoilModel, u_prev: &[f64], boundary_u_next: &[f64]) -> f64 {
    let interior = saturation_bounds(mesh, model, u_prev).1;
    boundary_u_next.iter().map(|&u| model.theta(u)).fold(interior, f64::max)
}
