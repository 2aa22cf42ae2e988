//! Dense vectors and the few matrix helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Builds a vector, rejecting NaN and infinite entries.
pub fn vector(coords: Vec<f64>) -> Result<Vector> {
    let v = Vector::from_vec(coords);
    ensure_finite(&v, "vector construction")?;
    Ok(v)
}

pub fn ensure_finite(v: &Vector, context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteValue { context })
    }
}

/// Function values may be `+inf` (indicators) but never NaN.
pub fn ensure_value(x: f64, context: &'static str) -> Result<f64> {
    if x.is_nan() || x == f64::NEG_INFINITY {
        Err(Error::NonFiniteValue { context })
    } else {
        Ok(x)
    }
}

pub fn ensure_dim(v: &Vector, expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found: v.len() })
    }
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Power iteration on `JᵀJ` given the two Jacobian actions; returns an estimate of `‖J‖_op`.
pub fn power_opnorm<F, G>(dim_in: usize, jvp: F, vjp: G, iters: usize, tol: f64) -> f64
where
    F: Fn(&Vector) -> Vector,
    G: Fn(&Vector) -> Vector,
{
    if dim_in == 0 {
        return 0.0;
    }
    let mut v = Vector::from_fn(dim_in, |i, _| 1.0 + 0.1 * (i as f64 + 1.0).sin());
    v /= v.norm();
    let mut sigma = 0.0;
    for _ in 0..iters {
        let w = vjp(&jvp(&v));
        let lambda = w.norm();
        if lambda == 0.0 {
            return 0.0;
        }
        let next = lambda.sqrt();
        v = w / lambda;
        let done = (next - sigma).abs() <= tol * next;
        sigma = next;
        if done {
            break;
        }
    }
    sigma
}

pub fn dist(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm()
}
