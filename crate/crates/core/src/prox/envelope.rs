use std::sync::Arc;

use super::{envelope_gradient, envelope_value, prox_of_envelope, L1Norm, ProxFunction};
use crate::linalg::Vector;

/// `f_ν(x) = min_z f(z) + ‖z − x‖²/(2ν)`, a `1/ν`-smooth function with the
/// same Lipschitz constant as `f`.
#[derive(Clone, Debug)]
pub struct MoreauEnvelope {
    base: Arc<dyn ProxFunction>,
    nu: f64,
}

impl MoreauEnvelope {
    pub fn new(base: Arc<dyn ProxFunction>, nu: f64) -> Self {
        assert!(nu > 0.0 && nu.is_finite(), "envelope parameter must be positive");
        Self { base, nu }
    }

    pub fn base(&self) -> &Arc<dyn ProxFunction> {
        &self.base
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
}

impl ProxFunction for MoreauEnvelope {
    fn value(&self, x: &Vector) -> f64 {
        envelope_value(self.base.as_ref(), self.nu, x).unwrap_or(f64::INFINITY)
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        prox_of_envelope(self.base.as_ref(), self.nu, t, x)
    }
    fn lipschitz(&self) -> Option<f64> {
        self.base.lipschitz()
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        envelope_gradient(self.base.as_ref(), self.nu, x).ok()
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        Some(1.0 / self.nu)
    }
    fn kind(&self) -> super::ProxKind {
        self.base.kind()
    }
    fn scalar_prox(&self, t: f64, s: f64) -> f64 {
        let r = t + self.nu;
        s * (self.nu / r) + self.base.scalar_prox(r, s) * (t / r)
    }
    fn scalar_gradient(&self, s: f64) -> Option<f64> {
        Some((s - self.base.scalar_prox(self.nu, s)) / self.nu)
    }
}

/// Separable Huber function `Σ_i h_κ(x_i)` on `R^dim`, realized as the
/// envelope of `‖·‖₁` with parameter `κ`.
pub fn huber(kappa: f64, dim: usize) -> MoreauEnvelope {
    MoreauEnvelope::new(Arc::new(L1Norm::new(1.0, dim)), kappa)
}
