//! Sparse-grid stochastic collocation for parabolic problems on randomly
//! deformed domains.
//!
//! The random domain is pulled back to the unit square, where the deformation
//! appears as a random matrix coefficient. Mean and variance of a linear
//! quantity of interest are then estimated by collocating the deterministic
//! finite element solver on an isotropic Smolyak grid of Clenshaw-Curtis nodes.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deformation;
pub mod fem;
pub mod sparse_grid;
pub mod uq;
