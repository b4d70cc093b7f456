//! Gradient-based reduction of high-dimensional parameter spaces.
//!
//! Three techniques share one pipeline shape: estimate gradients of a scalar
//! function on the normalized hypercube, learn a map to a few reduced
//! coordinates, and fit a response surface on those coordinates.
//!
//! - [`active`]: linear active subspaces from the gradient covariance.
//! - [`kas`]: active subspaces in a random Fourier feature space.
//! - [`nll`]: nonlinear level-set learning with a reversible coupling network.
//!
//! Supporting modules cover gradient estimation ([`gradients`]), response
//! surfaces ([`surface`]), analytic benchmarks ([`testfns`]) and sample-file
//! parsing ([`io`]).

// `!(x > 0.0)` is the deliberate NaN-rejecting form throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod active;
pub mod domain;
pub mod error;
pub mod gradients;
pub mod io;
pub mod kas;
pub mod linalg;
pub mod nll;
pub mod rng;
pub mod surface;
pub mod testfns;

pub use active::{
    bootstrap, covariance_matrix, eigendecompose, partition, subspace_distance, BootstrapSummary, Criterion, Subspace,
};
pub use domain::{chain_rule_scale, denormalize, normalize, Bounds, GradientSet, GradientSource, SampleSet};
pub use error::{Error, ErrorClass, Result};
pub use rng::RngStream;
