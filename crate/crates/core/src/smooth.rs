//! Smooth maps `c: R^d → R^m` given by values and Jacobian actions.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::linalg::{power_opnorm, spectral_norm, Matrix, Vector};
use crate::rng::{seeded, unit_vector};

/// A `C¹` map with `β`-Lipschitz Jacobian.
pub trait SmoothMap: Debug + Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    /// `∇c(x)·v`.
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector;
    /// `∇c(x)ᵀ·w`.
    fn vjp(&self, x: &Vector, w: &Vector) -> Vector;
    /// Lipschitz constant of `x ↦ ∇c(x)` in operator norm.
    fn beta(&self) -> f64;
    /// Upper bound on `‖∇c(x)‖_op` over the domain of `g`; may be infinite.
    fn opnorm_bound(&self) -> f64;

    /// Operator norm of the Jacobian at `x`, when the map can supply it.
    fn opnorm_at(&self, _x: &Vector) -> Option<f64> {
        None
    }

    /// Dense Jacobian, column by column through `jvp`.
    fn jacobian(&self, x: &Vector) -> Matrix {
        let d = self.dim_in();
        let mut j = Matrix::zeros(self.dim_out(), d);
        for k in 0..d {
            let mut e = Vector::zeros(d);
            e[k] = 1.0;
            j.set_column(k, &self.jvp(x, &e));
        }
        j
    }
}

/// Power-iteration estimate of `‖∇c(x)‖_op` (50 steps, tolerance 1e-6).
pub fn estimate_opnorm(c: &dyn SmoothMap, x: &Vector) -> f64 {
    power_opnorm(c.dim_in(), |v| c.jvp(x, v), |w| c.vjp(x, w), 50, 1e-6)
}

/// `c(x) = A x + offset`.
#[derive(Clone, Debug)]
pub struct AffineMap {
    a: Matrix,
    offset: Vector,
    norm: f64,
}

impl AffineMap {
    pub fn new(a: Matrix, offset: Vector) -> Self {
        assert_eq!(a.nrows(), offset.len());
        let norm = spectral_norm(&a);
        Self { a, offset, norm }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }
}

impl SmoothMap for AffineMap {
    fn dim_in(&self) -> usize {
        self.a.ncols()
    }
    fn dim_out(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, x: &Vector) -> Vector {
        &self.a * x + &self.offset
    }
    fn jvp(&self, _x: &Vector, v: &Vector) -> Vector {
        &self.a * v
    }
    fn vjp(&self, _x: &Vector, w: &Vector) -> Vector {
        self.a.tr_mul(w)
    }
    fn beta(&self) -> f64 {
        0.0
    }
    fn opnorm_bound(&self) -> f64 {
        self.norm
    }
    fn opnorm_at(&self, _x: &Vector) -> Option<f64> {
        Some(self.norm)
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.a.clone()
    }
}

/// Components `c_i(x) = r_i + ⟨a_i, x⟩ + ½ xᵀ B_i x` with symmetric `B_i`.
#[derive(Clone, Debug)]
pub struct QuadraticMap {
    linear: Matrix,
    hessians: Vec<Matrix>,
    offset: Vector,
    beta: f64,
    opnorm_bound: f64,
}

impl QuadraticMap {
    /// `radius` bounds `‖x‖` over the domain of `g`; `None` means unbounded.
    pub fn new(linear: Matrix, hessians: Vec<Matrix>, offset: Vector, radius: Option<f64>) -> Self {
        assert_eq!(linear.nrows(), hessians.len());
        assert_eq!(linear.nrows(), offset.len());
        let beta = hessians.iter().map(|b| spectral_norm(b).powi(2)).sum::<f64>().sqrt();
        let opnorm_bound = match radius {
            Some(r) => spectral_norm(&linear) + beta * r,
            None if beta == 0.0 => spectral_norm(&linear),
            None => f64::INFINITY,
        };
        Self { linear, hessians, offset, beta, opnorm_bound }
    }

    pub fn linear(&self) -> &Matrix {
        &self.linear
    }

    pub fn hessians(&self) -> &[Matrix] {
        &self.hessians
    }

    pub fn offset(&self) -> &Vector {
        &self.offset
    }
}

impl SmoothMap for QuadraticMap {
    fn dim_in(&self) -> usize {
        self.linear.ncols()
    }
    fn dim_out(&self) -> usize {
        self.linear.nrows()
    }
    fn eval(&self, x: &Vector) -> Vector {
        let lin = &self.linear * x + &self.offset;
        Vector::from_fn(self.dim_out(), |i, _| lin[i] + 0.5 * x.dot(&(&self.hessians[i] * x)))
    }
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let lin = &self.linear * v;
        Vector::from_fn(self.dim_out(), |i, _| lin[i] + x.dot(&(&self.hessians[i] * v)))
    }
    fn vjp(&self, x: &Vector, w: &Vector) -> Vector {
        let mut out = self.linear.tr_mul(w);
        for (i, b) in self.hessians.iter().enumerate() {
            if w[i] != 0.0 {
                out += (b * x) * w[i];
            }
        }
        out
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn opnorm_bound(&self) -> f64 {
        self.opnorm_bound
    }
    fn opnorm_at(&self, x: &Vector) -> Option<f64> {
        Some(spectral_norm(&self.jacobian(x)))
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        let mut j = self.linear.clone();
        for (i, b) in self.hessians.iter().enumerate() {
            let row = b * x;
            for k in 0..j.ncols() {
                j[(i, k)] += row[k];
            }
        }
        j
    }
}

/// `c_i(x) = ⟨a_i, x⟩² − b_i`, the rows `a_i` stacked in `A`.
#[derive(Clone, Debug)]
pub struct PhaseRetrievalMap {
    a: Matrix,
    b: Vector,
    beta: f64,
    opnorm_bound: f64,
}

impl PhaseRetrievalMap {
    /// `radius` bounds `‖x‖` over the domain of `g`; `None` means unbounded.
    pub fn new(a: Matrix, b: Vector, radius: Option<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        let max_row = (0..a.nrows()).map(|i| a.row(i).norm()).fold(0.0, f64::max);
        // ∇c(x) − ∇c(y) = 2·diag(A(x−y))·A.
        let beta = 2.0 * max_row * spectral_norm(&a);
        let opnorm_bound = radius.map_or(f64::INFINITY, |r| beta * r);
        Self { a, b, beta, opnorm_bound }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn measurements(&self) -> &Vector {
        &self.b
    }
}

impl SmoothMap for PhaseRetrievalMap {
    fn dim_in(&self) -> usize {
        self.a.ncols()
    }
    fn dim_out(&self) -> usize {
        self.a.nrows()
    }
    fn eval(&self, x: &Vector) -> Vector {
        let ax = &self.a * x;
        Vector::from_fn(ax.len(), |i, _| ax[i] * ax[i] - self.b[i])
    }
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        let ax = &self.a * x;
        let av = &self.a * v;
        ax.component_mul(&av) * 2.0
    }
    fn vjp(&self, x: &Vector, w: &Vector) -> Vector {
        let ax = &self.a * x;
        self.a.tr_mul(&(ax.component_mul(w) * 2.0))
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn opnorm_bound(&self) -> f64 {
        self.opnorm_bound
    }
    fn opnorm_at(&self, x: &Vector) -> Option<f64> {
        Some(spectral_norm(&self.jacobian(x)))
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        let ax = &self.a * x;
        let mut j = self.a.clone();
        for i in 0..j.nrows() {
            let s = 2.0 * ax[i];
            j.row_mut(i).scale_mut(s);
        }
        j
    }
}

/// Call counts observed by a [`GreyBox`] wrapper.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GreyBoxCounts {
    pub eval: u64,
    pub jvp: u64,
    pub vjp: u64,
}

/// Wraps a map whose internals are opaque and records every oracle call.
#[derive(Debug)]
pub struct GreyBox {
    inner: Arc<dyn SmoothMap>,
    eval: AtomicU64,
    jvp: AtomicU64,
    vjp: AtomicU64,
}

impl GreyBox {
    pub fn new(inner: Arc<dyn SmoothMap>) -> Self {
        Self { inner, eval: AtomicU64::new(0), jvp: AtomicU64::new(0), vjp: AtomicU64::new(0) }
    }

    pub fn counts(&self) -> GreyBoxCounts {
        GreyBoxCounts {
            eval: self.eval.load(Ordering::Relaxed),
            jvp: self.jvp.load(Ordering::Relaxed),
            vjp: self.vjp.load(Ordering::Relaxed),
        }
    }
}

impl SmoothMap for GreyBox {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn eval(&self, x: &Vector) -> Vector {
        self.eval.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }
    fn jvp(&self, x: &Vector, v: &Vector) -> Vector {
        self.jvp.fetch_add(1, Ordering::Relaxed);
        self.inner.jvp(x, v)
    }
    fn vjp(&self, x: &Vector, w: &Vector) -> Vector {
        self.vjp.fetch_add(1, Ordering::Relaxed);
        self.inner.vjp(x, w)
    }
    fn beta(&self) -> f64 {
        self.inner.beta()
    }
    fn opnorm_bound(&self) -> f64 {
        self.inner.opnorm_bound()
    }
    fn opnorm_at(&self, x: &Vector) -> Option<f64> {
        self.inner.opnorm_at(x)
    }
}

/// Worst relative discrepancy between central differences of `eval` and
/// `jvp` along random unit directions, combined with the adjoint mismatch
/// `|⟨jvp(x,v), w⟩ − ⟨v, vjp(x,w)⟩|` for the same directions.
pub fn finite_diff_jacobian_check(c: &dyn SmoothMap, x: &Vector, n_dirs: usize, seed: u64) -> f64 {
    assert!(n_dirs >= 1, "need at least one direction");
    let mut rng = seeded(seed);
    let step = 1e-6 * (1.0 + x.norm());
    let mut worst: f64 = 0.0;
    for _ in 0..n_dirs {
        let v = unit_vector(&mut rng, c.dim_in());
        let w = unit_vector(&mut rng, c.dim_out());
        let jv = c.jvp(x, &v);
        let fd = (c.eval(&(x + &v * step)) - c.eval(&(x - &v * step))) / (2.0 * step);
        let scale = jv.norm().max(1.0);
        worst = worst.max((&fd - &jv).norm() / scale);
        let lhs = jv.dot(&w);
        let rhs = v.dot(&c.vjp(x, &w));
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    worst
}
