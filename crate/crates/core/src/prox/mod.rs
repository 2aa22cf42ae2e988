//! Convex functions accessed through values and proximal maps.
//!
//! Conjugates are never represented: every `h⋆` operation goes through the
//! Moreau identity `prox_{t h⋆}(w) = w − t·prox_{h/t}(w/t)`.

mod envelope;
mod library;

use std::fmt::Debug;
use std::sync::Arc;

pub use envelope::{huber, MoreauEnvelope};
pub use library::{
    BlockSeparable, BoxIndicator, DistToNonnegOrthant, Identity, L1Norm, L2Norm, MaxCoord, NonnegIndicator,
    NumericalScalar, QuadraticallyRegularized, Scaled, SquaredL2, Zero,
};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// How a proximal map is computed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProxKind {
    ClosedForm,
    /// Embedded scalar root finding; the argmin is accurate to `tol·(1+‖x‖)`.
    Numerical {
        tol: f64,
    },
}

/// A closed convex function known through its value and proximal map.
pub trait ProxFunction: Debug + Send + Sync {
    /// Function value; `+inf` outside the domain.
    fn value(&self, x: &Vector) -> f64;

    /// `argmin_z value(z) + ‖z − x‖²/(2t)` for `t > 0`.
    fn prox(&self, t: f64, x: &Vector) -> Vector;

    /// Global Lipschitz constant, if finite.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    fn strong_convexity(&self) -> f64 {
        0.0
    }

    /// Gradient for differentiable functions.
    fn gradient(&self, _x: &Vector) -> Option<Vector> {
        None
    }

    /// Lipschitz constant of the gradient for differentiable functions.
    fn grad_lipschitz(&self) -> Option<f64> {
        None
    }

    fn domain_diameter(&self) -> Option<f64> {
        None
    }

    fn kind(&self) -> ProxKind {
        ProxKind::ClosedForm
    }

    /// True for the scalar map `z ↦ z`, which turns the composite problem
    /// into an additive one.
    fn is_identity(&self) -> bool {
        false
    }

    /// `prox` of a one-dimensional function at a scalar.
    fn scalar_prox(&self, t: f64, s: f64) -> f64 {
        self.prox(t, &Vector::from_element(1, s))[0]
    }

    /// Derivative of a differentiable one-dimensional function.
    fn scalar_gradient(&self, s: f64) -> Option<f64> {
        self.gradient(&Vector::from_element(1, s)).map(|g| g[0])
    }
}

impl<F: ProxFunction + ?Sized> ProxFunction for Arc<F> {
    fn value(&self, x: &Vector) -> f64 {
        (**self).value(x)
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        (**self).prox(t, x)
    }
    fn lipschitz(&self) -> Option<f64> {
        (**self).lipschitz()
    }
    fn strong_convexity(&self) -> f64 {
        (**self).strong_convexity()
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        (**self).gradient(x)
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        (**self).grad_lipschitz()
    }
    fn domain_diameter(&self) -> Option<f64> {
        (**self).domain_diameter()
    }
    fn kind(&self) -> ProxKind {
        (**self).kind()
    }
    fn is_identity(&self) -> bool {
        (**self).is_identity()
    }
    fn scalar_prox(&self, t: f64, s: f64) -> f64 {
        (**self).scalar_prox(t, s)
    }
    fn scalar_gradient(&self, s: f64) -> Option<f64> {
        (**self).scalar_gradient(s)
    }
}

/// `min_z f(z) + ‖z − x‖²/(2ν)`, evaluated at `z = prox_{νf}(x)`.
pub fn envelope_value(f: &dyn ProxFunction, nu: f64, x: &Vector) -> Result<f64> {
    check_positive("nu", nu)?;
    let p = f.prox(nu, x);
    let fp = f.value(&p);
    if !fp.is_finite() {
        return Err(Error::NonConvexBase(format!(
            "prox output has value {fp}; the proximal map does not land in the domain"
        )));
    }
    Ok(fp + (&p - x).norm_squared() / (2.0 * nu))
}

/// `(x − prox_{νf}(x))/ν`.
pub fn envelope_gradient(f: &dyn ProxFunction, nu: f64, x: &Vector) -> Result<Vector> {
    check_positive("nu", nu)?;
    Ok((x - f.prox(nu, x)) / nu)
}

/// `prox_{t h⋆}(w) = w − t·prox_{h/t}(w/t)`.
pub fn prox_conjugate(h: &dyn ProxFunction, t: f64, w: &Vector) -> Vector {
    let scaled = w / t;
    w - h.prox(1.0 / t, &scaled) * t
}

/// `prox_{t h_ν}(x) = (ν/(t+ν))·x + (t/(t+ν))·prox_{(t+ν)h}(x)`.
pub fn prox_of_envelope(h: &dyn ProxFunction, nu: f64, t: f64, x: &Vector) -> Vector {
    let s = t + nu;
    x * (nu / s) + h.prox(s, x) * (t / s)
}

/// Step used to probe `h⋆` through the Moreau identity.
const CONJUGATE_PROBE_STEP: f64 = 1e-10;
/// Distance from `w` to `prox_{τh⋆}(w)` beyond which `w` is treated as outside `dom h⋆`.
const CONJUGATE_DOMAIN_TOL: f64 = 1e-8;

/// `h⋆(w)`, recovered from the proximal map of `h`.
///
/// With `p = prox_{h/τ}(w/τ)` and small `τ`, Fenchel–Young gives the value
/// `⟨w, p⟩ − h(p)`, exact up to `O(τ²)` curvature terms, while
/// `‖w − prox_{τh⋆}(w)‖ = τ‖p‖` detects points outside the domain.
pub fn conjugate_value(h: &dyn ProxFunction, w: &Vector) -> Result<f64> {
    let tau = CONJUGATE_PROBE_STEP;
    let p = h.prox(1.0 / tau, &(w / tau));
    if tau * p.norm() > CONJUGATE_DOMAIN_TOL * (1.0 + w.norm()) {
        return Err(Error::OutsideDualDomain);
    }
    let hp = h.value(&p);
    if !hp.is_finite() {
        return Err(Error::OutsideDualDomain);
    }
    Ok(w.dot(&p) - hp)
}

pub(crate) fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {value}")))
    }
}

#[cfg(test)]
mod tests;
