//! Semi-implicit P1 finite element solver for the Richards equation in a
//! bounded auxiliary variable `u`.
//!
//! Two time steppers are provided: an explicit treatment of the gravity term
//! ([`schemes::Scheme::ExplicitGravity`]) and a linearly implicit treatment of
//! advection through the lagged ratio `beta = Kbar(u)/u`
//! ([`schemes::Scheme::LinearlyImplicit`]). The [`diagnostics`] module
//! evaluates, at every step, the algebraic quantities that decide whether the
//! discrete minimum and maximum principles are guaranteed.

pub mod assembly;
pub mod constitutive;
pub mod diagnostics;
pub mod mesh;
pub mod schemes;
pub mod sparse;

pub use assembly::AssembledOperators;
pub use constitutive::{SaturationCore, SoilKind, SoilModel};
pub use diagnostics::StepDiagnostics;
pub use mesh::{Mesh, Side};
pub use schemes::{NewtonReport, Scheme, SchemeConfig, State};
pub use sparse::SparseMatrix;
