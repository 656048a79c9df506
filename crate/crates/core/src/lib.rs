//! Sparse-precision Gaussian random fields.
//!
//! The crate covers the stochastic PDE route to Matérn fields on planar
//! triangulations ([`mesh`], [`fem`]), a sparse Gaussian kernel ([`gmrf`]),
//! areal and space-time models ([`areal`]), penalised-complexity priors
//! ([`priors`]), finite-difference grid operators ([`stencil`]) and
//! Laplace-approximation inference ([`inference`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod areal;
pub mod error;
pub mod fem;
pub mod gmrf;
pub mod inference;
pub mod mesh;
pub mod par;
pub mod priors;
pub mod rng;
pub mod sparse;
pub mod stencil;

pub use error::{Error, Result};
pub use gmrf::{factorize, Constraints, Gmrf, PrecisionModel};
pub use sparse::{SparseMatrix, SparseVector};
