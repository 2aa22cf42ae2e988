//! Prox-linear methods for composite problems `min_x g(x) + h(c(x))`.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accelerated;
pub mod error;
pub mod fast_gradient;
pub mod finite_sum;
pub mod linalg;
pub mod oracle;
pub mod par;
pub mod problem;
pub mod problems;
pub mod prox;
pub mod prox_linear;
pub mod rng;
pub mod smooth;
pub mod smoothing;
pub mod subproblem;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use oracle::{Oracle, OracleCounters};
pub use problem::CompositeProblem;
