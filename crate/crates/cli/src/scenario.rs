//! Turning a parsed config into mesh, soil, scheme and discrete data.

use crate::config::{ConfigError, DirichletValue, GeometryConfig, ScenarioConfig};
use richards_core::mesh::{build_interval_mesh, build_rect_mesh, Mesh};
use richards_core::schemes::{Scheme, SchemeConfig, State};
use richards_core::SoilModel;
use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub mesh: Mesh,
    pub model: SoilModel,
    pub scheme: SchemeConfig,
    pub initial: State,
    /// Dirichlet data in `u`, ordered like `mesh.boundary_nodes()`
    pub dirichlet: Vec<f64>,
}

fn semantic(msg: impl Into<String>) -> ConfigError {
    ConfigError::Semantic { msg: msg.into() }
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig) -> Result<Scenario, ConfigError> {
        let model = cfg.soil_model().map_err(|e| semantic(e.to_string()))?;
        let scheme = cfg.scheme_config().map_err(semantic)?;
        let sides = cfg.dirichlet_sides().map_err(semantic)?;
        let mesh = match cfg.geometry {
            GeometryConfig::Rect { length, height, nx, nz } => {
                let set: BTreeSet<_> = sides.keys().copied().collect();
                build_rect_mesh(length, height, nx, nz, &set)
            }
            GeometryConfig::Interval { height, points } => build_interval_mesh(height, points),
        }
        .map_err(|e| semantic(e.to_string()))?;

        let mut u = Vec::with_capacity(mesh.n_vertices());
        for v in 0..mesh.n_vertices() {
            let z = mesh.height(v);
            let theta = cfg
                .initial_theta(z)
                .ok_or_else(|| semantic(format!("initial condition does not cover z = {z}")))?;
            u.push(model.theta_inverse(theta));
        }
        let markers = mesh.boundary_markers();
        let dirichlet = mesh
            .boundary_nodes()
            .iter()
            .map(|&v| match &sides[&markers[&v]] {
                DirichletValue::Theta(t) => model.theta_inverse(*t),
                DirichletValue::Keyword(_) => u[v],
            })
            .collect();
        Ok(Scenario { config: cfg.clone(), mesh, model, scheme, initial: State { time: 0.0, u }, dirichlet })
    }

    /// Applies command-line overrides of the step size and scheme.
    pub fn with_overrides(mut self, tau: Option<f64>, scheme: Option<Scheme>) -> Result<Scenario, ConfigError> {
        if let Some(t) = tau {
            self.scheme.tau = t;
        }
        if let Some(s) = scheme {
            self.scheme.scheme = s;
        }
        self.scheme.validate().map_err(|e| semantic(e.to_string()))?;
        Ok(self)
    }

    /// Representative mesh size `h` (largest element diameter).
    pub fn h_max(&self) -> f64 {
        (0..self.mesh.n_elements())
            .map(|e| self.mesh.element_geometry(e).map_or(0.0, |g| g.diameter))
            .fold(0.0, f64::max)
    }
}
