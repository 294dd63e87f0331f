//! Collocation sweeps over sparse grids, moment estimation, convergence and
//! truncation studies, and the a-priori error bound and work planner.

pub mod bounds;
mod cache;
mod config;
mod exec;
mod solver;
mod study;

use thiserror::Error;

use crate::deformation::DeformationError;
use crate::fem::FemError;
use crate::sparse_grid::{GridError, NodeKey};

pub use bounds::{
    complexity_plan, decreasing_threshold, log_sparse_grid_error_bound, sparse_grid_error_bound, BoundError,
    BoundParams, ComplexityPlan,
};
pub use cache::{fingerprint_hash, CachedSolve, CollocationCache};
pub use config::{GridConfig, ModelConfig, QoiWeight, SolverConfig, StudyConfig, StudySection};
pub use exec::Execution;
pub use solver::CollocationSolver;
pub use study::{
    convergence_csv, moments_csv, records_csv, reference_moments, run_collocation, truncation_csv, CollocationRecord,
    CollocationRun, ConvergenceRow, MomentResult, Provenance, Session, TruncationRow,
};

#[derive(Debug, Error)]
pub enum UqError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solve failed at node {key}: {source}")]
    NodeFailed {
        key: NodeKey,
        #[source]
        source: Box<UqError>,
    },
    #[error("inadmissible deformation: {0}")]
    Inadmissible(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Deformation(#[from] DeformationError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, UqError>;
