use thiserror::Error;

/// Failures raised by oracles, subsolvers and outer loops.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value produced by {context}")]
    NonFiniteValue { context: &'static str },

    #[error("inner solver used {iters} iterations without certifying {target:e} (best {reached:e})")]
    BudgetExhausted { iters: usize, target: f64, reached: f64 },

    #[error("objective rose at iteration {k}: F(x_k)={before}, F(x_k+1)={after}, required decrease {required:e}")]
    StepIncreasedObjective { k: usize, before: f64, after: f64, required: f64 },

    #[error("subsolver cannot certify a functional gap of {target:e}")]
    CertificateMissing { target: f64 },

    #[error("dual residual {reached:e} above target {target:e} after {iters} iterations")]
    DualBudgetExhausted { iters: usize, target: f64, reached: f64 },

    #[error("rate constants gamma={gamma}, tau={tau} are invalid (need gamma >= 0, 0 < tau < 1)")]
    InvalidRateConstants { gamma: f64, tau: f64 },

    #[error("mu_tilde={mu_tilde} must exceed mu={mu}")]
    InvalidMuTilde { mu_tilde: f64, mu: f64 },

    #[error("total budget {total} is below the required minimum {required:.3}")]
    BudgetTooSmall { total: usize, required: f64 },

    #[error("dual point lies outside the domain of the conjugate")]
    OutsideDualDomain,

    #[error("base function has no usable proximal map: {0}")]
    NonConvexBase(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
