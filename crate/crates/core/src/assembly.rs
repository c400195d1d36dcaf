//! Discrete operators with lagged coefficients.
//!
//! Coefficients enter every element integral through vertex quadrature: `K`
//! and `Kbar` are averaged over the element vertices, and the advective
//! bilinear form uses the nodal rule `int_T beta phi_j dx ~ |T|/(d+1) beta_j`.

use crate::constitutive::SoilModel;
use crate::mesh::{ElementGeometry, Mesh, MeshError};
use crate::sparse::{SparseError, SparseMatrix};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("state has {got} entries, mesh has {expected} nodes")]
    StateLength { expected: usize, got: usize },
    #[error("boundary data has {got} entries, mesh has {expected} Dirichlet nodes")]
    BoundaryLength { expected: usize, got: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// All operators assembled from one lagged state.
#[derive(Debug, Clone)]
pub struct AssembledOperators {
    /// `m_i = int phi_i`, all nodes
    pub lumped_mass: Vec<f64>,
    /// `A_ij = int K(u_prev) grad phi_j . grad phi_i`, all nodes
    pub stiffness_full: SparseMatrix,
    /// `C_ij = int beta(u_prev) phi_j e_z . grad phi_i`, all nodes
    pub advection_full: SparseMatrix,
    /// `G_i = -int Kbar(u_prev) e_z . grad phi_i`, interior nodes
    pub gravity_load: Vec<f64>,
    /// `-sum_{j in Gamma} A_ij u_b,j`, interior nodes
    pub boundary_lift: Vec<f64>,
    /// `A + C`, all nodes
    pub s_full: SparseMatrix,
}

impl AssembledOperators {
    pub fn assemble(
        mesh: &Mesh,
        model: &SoilModel,
        u_prev: &[f64],
        boundary_u: &[f64],
    ) -> Result<AssembledOperators, AssemblyError> {
        check_state(mesh, u_prev)?;
        check_boundary(mesh, boundary_u)?;
        let lumped_mass = lumped_mass(mesh)?;
        let stiffness_full = assemble_stiffness(mesh, model, u_prev)?;
        let advection_full = assemble_advection(mesh, model, u_prev)?;
        let gravity_full = gravity_load_full(mesh, model, u_prev)?;
        let gravity_load = restrict(mesh, &gravity_full);
        let boundary_lift = dirichlet_lift(mesh, &stiffness_full, boundary_u);
        let s_full = stiffness_full.add(&advection_full)?;
        Ok(AssembledOperators {
            lumped_mass,
            stiffness_full,
            advection_full,
            gravity_load,
            boundary_lift,
            s_full,
        })
    }

    /// Boundary-lifted explicit load `G~ = G - sum_{j in Gamma} A_ij u_b,j`.
    pub fn gravity_load_tilde(&self) -> Vec<f64> {
        self.gravity_load.iter().zip(&self.boundary_lift).map(|(g, l)| g + l).collect()
    }

    /// Lumped masses of the interior nodes.
    pub fn interior_mass(&self, mesh: &Mesh) -> Vec<f64> {
        restrict(mesh, &self.lumped_mass)
    }
}

fn check_state(mesh: &Mesh, u: &[f64]) -> Result<(), AssemblyError> {
    if u.len() != mesh.n_vertices() {
        return Err(AssemblyError::StateLength { expected: mesh.n_vertices(), got: u.len() });
    }
    Ok(())
}

fn check_boundary(mesh: &Mesh, ub: &[f64]) -> Result<(), AssemblyError> {
    if ub.len() != mesh.boundary_nodes().len() {
        return Err(AssemblyError::BoundaryLength { expected: mesh.boundary_nodes().len(), got: ub.len() });
    }
    Ok(())
}

/// Values of a full-node vector at the interior nodes.
pub fn restrict(mesh: &Mesh, full: &[f64]) -> Vec<f64> {
    mesh.interior_nodes().iter().map(|&v| full[v]).collect()
}

/// `-sum_{j in Gamma} M_ij u_b,j` for every interior row `i`.
pub fn dirichlet_lift(mesh: &Mesh, full: &SparseMatrix, boundary_u: &[f64]) -> Vec<f64> {
    let mut ub_full = vec![0.0; mesh.n_vertices()];
    for (&v, &u) in mesh.boundary_nodes().iter().zip(boundary_u) {
        ub_full[v] = u;
    }
    mesh.interior_nodes()
        .iter()
        .map(|&i| -full.row(i).filter(|&(j, _)| mesh.is_boundary(j)).map(|(j, a)| a * ub_full[j]).sum::<f64>())
        .collect()
}

/// Arithmetic mean of the vertex values (vertex quadrature on a simplex).
pub fn quadrature_average(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn geometries(mesh: &Mesh) -> Result<Vec<ElementGeometry>, MeshError> {
    (0..mesh.n_elements()).map(|e| mesh.element_geometry(e)).collect()
}

/// Lumped mass `m_i = sum_{T ni i} |T|/(d+1)`.
pub fn lumped_mass(mesh: &Mesh) -> Result<Vec<f64>, AssemblyError> {
    let mut m = vec![0.0; mesh.n_vertices()];
    let share = 1.0 / (mesh.dim() + 1) as f64;
    for (e, geo) in geometries(mesh)?.iter().enumerate() {
        for &v in mesh.element(e) {
            m[v] += geo.volume * share;
        }
    }
    Ok(m)
}

/// Lagged stiffness matrix over all nodes.
pub fn assemble_stiffness(mesh: &Mesh, model: &SoilModel, u_prev: &[f64]) -> Result<SparseMatrix, AssemblyError> {
    check_state(mesh, u_prev)?;
    let k_nodal: Vec<f64> = u_prev.iter().map(|&u| model.k_diffusive(u)).collect();
    let mut trip = Vec::with_capacity(mesh.n_elements() * 9);
    for (e, geo) in geometries(mesh)?.iter().enumerate() {
        let conn = mesh.element(e);
        let kv: Vec<f64> = conn.iter().map(|&v| k_nodal[v]).collect();
        let coeff = quadrature_average(&kv) * geo.volume;
        for (a, &i) in conn.iter().enumerate() {
            for (b, &j) in conn.iter().enumerate() {
                trip.push((i, j, coeff * geo.grad_dot(a, b)));
            }
        }
    }
    Ok(SparseMatrix::assemble(mesh.n_vertices(), &trip)?)
}

/// Nodal values of the advective ratio with negative states clamped to zero.
pub fn nodal_beta(model: &SoilModel, u_prev: &[f64]) -> Vec<f64> {
    u_prev.iter().map(|&u| model.beta(u.max(0.0))).collect()
}

/// Lagged advection matrix `C` over all nodes (nodal quadrature of `beta phi_j`).
pub fn assemble_advection(mesh: &Mesh, model: &SoilModel, u_prev: &[f64]) -> Result<SparseMatrix, AssemblyError> {
    check_state(mesh, u_prev)?;
    let beta = nodal_beta(model, u_prev);
    let dim = mesh.dim();
    let share = 1.0 / (dim + 1) as f64;
    let mut trip = Vec::with_capacity(mesh.n_elements() * 9);
    for (e, geo) in geometries(mesh)?.iter().enumerate() {
        let conn = mesh.element(e);
        for (a, &i) in conn.iter().enumerate() {
            let dz = geo.vertical_gradient(a, dim);
            for &j in conn {
                trip.push((i, j, geo.volume * share * beta[j] * dz));
            }
        }
    }
    Ok(SparseMatrix::assemble(mesh.n_vertices(), &trip)?)
}

/// Element-by-element `int f e_z . grad phi_i` for a nodal field `f` under
/// vertex quadrature, over all nodes.
pub fn vertical_flux_integrals(mesh: &Mesh, nodal: &[f64]) -> Result<Vec<f64>, AssemblyError> {
    check_state(mesh, nodal)?;
    let dim = mesh.dim();
    let mut out = vec![0.0; mesh.n_vertices()];
    for (e, geo) in geometries(mesh)?.iter().enumerate() {
        let conn = mesh.element(e);
        let fv: Vec<f64> = conn.iter().map(|&v| nodal[v]).collect();
        let avg = quadrature_average(&fv);
        for (a, &i) in conn.iter().enumerate() {
            out[i] += geo.volume * avg * geo.vertical_gradient(a, dim);
        }
    }
    Ok(out)
}

/// Explicit gravity load `G_i = -int Kbar(u_prev) e_z . grad phi_i` over all nodes.
pub fn gravity_load_full(mesh: &Mesh, model: &SoilModel, u_prev: &[f64]) -> Result<Vec<f64>, AssemblyError> {
    let kbar: Vec<f64> = u_prev.iter().map(|&u| model.k_advective(u)).collect();
    Ok(vertical_flux_integrals(mesh, &kbar)?.into_iter().map(|v| -v).collect())
}

/// Interior gravity load `G` and its boundary-lifted form `G~`.
pub fn gravity_load(
    mesh: &Mesh,
    model: &SoilModel,
    u_prev: &[f64],
    boundary_u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), AssemblyError> {
    check_boundary(mesh, boundary_u)?;
    let g = restrict(mesh, &gravity_load_full(mesh, model, u_prev)?);
    let a = assemble_stiffness(mesh, model, u_prev)?;
    let lift = dirichlet_lift(mesh, &a, boundary_u);
    let g_tilde = g.iter().zip(&lift).map(|(g, l)| g + l).collect();
    Ok((g, g_tilde))
}
