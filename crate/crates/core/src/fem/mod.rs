//! P1 finite elements on the unit square with a matrix-valued coefficient,
//! backward-Euler time stepping and the quantity-of-interest functional.

mod assembly;
mod manufactured;
mod mesh;
mod qoi;
mod sparse;
mod stepping;

use thiserror::Error;

use crate::deformation::DeformationError;

pub use assembly::{assemble_mass, assemble_neumann_load, assemble_stiffness, FemSpace};
pub use manufactured::{fit_slope, manufactured_convergence, ConvergenceReport, ManufacturedCase};
pub use mesh::{BoundaryEdge, BoundaryLayout, BoundaryTag, Mesh};
pub use qoi::{evaluate_qoi, separable_weight, QoiFunctional, Subdomain};
pub use sparse::{pcg, solve_linear, CgOptions, CsrMatrix, SolveStats};
pub use stepping::{
    backward_euler_solve, backward_euler_solve_forced, backward_euler_solve_observed, TransientProblem,
    TransientSolution,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FemError {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("non-finite coefficient on element {0}")]
    NonFiniteCoefficient(usize),
    #[error("non-positive mass weight {weight} on element {element}")]
    NonPositiveWeight { element: usize, weight: f64 },
    #[error("matrices do not share a sparsity pattern")]
    PatternMismatch,
    #[error("linear solve did not converge: {iterations} iterations, relative residual {relative_residual:e}")]
    NotConverged { iterations: usize, relative_residual: f64 },
    #[error("invalid transient problem: {0}")]
    InvalidProblem(String),
    #[error("subdomain is not resolved by the mesh (element {0} straddles x2 = 0.5)")]
    UnalignedSubdomain(usize),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
}

pub type Result<T> = std::result::Result<T, FemError>;
