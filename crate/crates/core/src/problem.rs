//! The composite problem `min_x F(x) = g(x) + h(c(x))`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prox::ProxFunction;
use crate::smooth::SmoothMap;

/// `g` closed convex with a cheap prox, `h` convex and `L`-Lipschitz,
/// `c` smooth with `β`-Lipschitz Jacobian.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    g: Arc<dyn ProxFunction>,
    h: Arc<dyn ProxFunction>,
    c: Arc<dyn SmoothMap>,
    lipschitz: f64,
    beta: f64,
    opnorm: f64,
}

impl CompositeProblem {
    /// Takes `L` from `h` and `β`, `‖∇c‖` from `c`.
    pub fn new(g: Arc<dyn ProxFunction>, h: Arc<dyn ProxFunction>, c: Arc<dyn SmoothMap>) -> Result<Self> {
        let lipschitz = h
            .lipschitz()
            .ok_or_else(|| Error::InvalidParameter("outer function has no finite Lipschitz constant".into()))?;
        let (beta, opnorm) = (c.beta(), c.opnorm_bound());
        Self::with_constants(g, h, c, lipschitz, beta, opnorm)
    }

    /// Overrides the declared constants, e.g. with deliberately wrong values.
    pub fn with_constants(
        g: Arc<dyn ProxFunction>,
        h: Arc<dyn ProxFunction>,
        c: Arc<dyn SmoothMap>,
        lipschitz: f64,
        beta: f64,
        opnorm: f64,
    ) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidParameter(format!("Lipschitz constant {lipschitz}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("Jacobian Lipschitz constant {beta}")));
        }
        if opnorm.is_nan() || opnorm < 0.0 {
            return Err(Error::InvalidParameter(format!("Jacobian norm bound {opnorm}")));
        }
        Ok(Self { g, h, c, lipschitz, beta, opnorm })
    }

    pub fn g(&self) -> &Arc<dyn ProxFunction> {
        &self.g
    }

    pub fn h(&self) -> &Arc<dyn ProxFunction> {
        &self.h
    }

    pub fn c(&self) -> &Arc<dyn SmoothMap> {
        &self.c
    }

    pub fn dim(&self) -> usize {
        self.c.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.c.dim_out()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Weak-convexity constant `μ = L·β`.
    pub fn mu(&self) -> f64 {
        self.lipschitz * self.beta
    }

    /// Bound on `‖∇c(x)‖_op` over `dom g`; infinite when none is known.
    pub fn opnorm_bound(&self) -> f64 {
        self.opnorm
    }

    pub fn domain_diameter(&self) -> Option<f64> {
        self.g.domain_diameter()
    }

    /// `t = 1/μ`, or `1` when `μ = 0`.
    pub fn default_step(&self) -> f64 {
        let mu = self.mu();
        if mu > 0.0 {
            1.0 / mu
        } else {
            1.0
        }
    }

    pub fn with_g(&self, g: Arc<dyn ProxFunction>) -> Self {
        Self { g, ..self.clone() }
    }

    /// Replaces `h`, keeping `β` and `‖∇c‖` and reading `L` from the new `h`.
    pub fn with_h(&self, h: Arc<dyn ProxFunction>) -> Result<Self> {
        Self::with_constants(
            self.g.clone(),
            h.clone(),
            self.c.clone(),
            h.lipschitz().unwrap_or(self.lipschitz),
            self.beta,
            self.opnorm,
        )
    }

    /// Replaces `β`.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::with_constants(self.g.clone(), self.h.clone(), self.c.clone(), self.lipschitz, beta, self.opnorm)
    }
}
