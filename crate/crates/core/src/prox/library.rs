use std::sync::Arc;

use super::{ProxFunction, ProxKind};
use crate::linalg::Vector;

/// The zero function.
#[derive(Clone, Copy, Debug, Default)]
pub struct Zero;

impl ProxFunction for Zero {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, _t: f64, x: &Vector) -> Vector {
        x.clone()
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::zeros(x.len()))
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// `z ↦ z` on the real line.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl ProxFunction for Identity {
    fn value(&self, x: &Vector) -> f64 {
        x[0]
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        x.map(|v| v - t)
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(Vector::from_element(x.len(), 1.0))
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }
    fn is_identity(&self) -> bool {
        true
    }
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

/// `weight·‖x‖₁` on `R^dim`.
#[derive(Clone, Copy, Debug)]
pub struct L1Norm {
    pub weight: f64,
    pub dim: usize,
}

impl L1Norm {
    pub fn new(weight: f64, dim: usize) -> Self {
        Self { weight, dim }
    }
}

impl ProxFunction for L1Norm {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.lp_norm(1)
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        let lambda = t * self.weight;
        x.map(|v| soft_threshold(v, lambda))
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight * (self.dim as f64).sqrt())
    }
    fn scalar_prox(&self, t: f64, s: f64) -> f64 {
        soft_threshold(s, t * self.weight)
    }
}

/// `weight·‖x‖₂`.
#[derive(Clone, Copy, Debug)]
pub struct L2Norm {
    pub weight: f64,
}

impl ProxFunction for L2Norm {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.norm()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        let n = x.norm();
        let lambda = t * self.weight;
        if n <= lambda {
            Vector::zeros(x.len())
        } else {
            x * (1.0 - lambda / n)
        }
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }
}

/// `(weight/2)·‖x‖²`.
#[derive(Clone, Copy, Debug)]
pub struct SquaredL2 {
    pub weight: f64,
}

impl ProxFunction for SquaredL2 {
    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.weight * x.norm_squared()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        x / (1.0 + t * self.weight)
    }
    fn strong_convexity(&self) -> f64 {
        self.weight
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        Some(x * self.weight)
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }
}

/// Slack when testing box and orthant membership, so that averages of
/// feasible points are not rejected for rounding.
const MEMBERSHIP_TOL: f64 = 1e-12;

/// Indicator of `{x : lower ≤ x ≤ upper}`.
#[derive(Clone, Debug)]
pub struct BoxIndicator {
    pub lower: Vector,
    pub upper: Vector,
}

impl BoxIndicator {
    pub fn new(lower: Vector, upper: Vector) -> Self {
        assert_eq!(lower.len(), upper.len(), "box bounds must have equal length");
        assert!(lower.iter().zip(upper.iter()).all(|(l, u)| l <= u), "empty box");
        Self { lower, upper }
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Self {
        Self::new(Vector::from_element(dim, lower), Vector::from_element(dim, upper))
    }

    pub fn project(&self, x: &Vector) -> Vector {
        Vector::from_fn(x.len(), |i, _| x[i].clamp(self.lower[i], self.upper[i]))
    }
}

impl ProxFunction for BoxIndicator {
    fn value(&self, x: &Vector) -> f64 {
        let inside = x.iter().enumerate().all(|(i, &v)| {
            v >= self.lower[i] - MEMBERSHIP_TOL * (1.0 + self.lower[i].abs())
                && v <= self.upper[i] + MEMBERSHIP_TOL * (1.0 + self.upper[i].abs())
        });
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _t: f64, x: &Vector) -> Vector {
        self.project(x)
    }
    fn domain_diameter(&self) -> Option<f64> {
        Some((&self.upper - &self.lower).norm())
    }
}

/// Indicator of the nonnegative orthant.
#[derive(Clone, Copy, Debug, Default)]
pub struct NonnegIndicator;

impl ProxFunction for NonnegIndicator {
    fn value(&self, x: &Vector) -> f64 {
        if x.iter().all(|&v| v >= -MEMBERSHIP_TOL) {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _t: f64, x: &Vector) -> Vector {
        x.map(|v| v.max(0.0))
    }
}

/// `max_i x_i`.
#[derive(Clone, Copy, Debug, Default)]
pub struct MaxCoord;

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: &Vector) -> Vector {
    let mut sorted: Vec<f64> = y.iter().copied().collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let candidate = (cumsum - 1.0) / (j as f64 + 1.0);
        if s - candidate > 0.0 {
            theta = candidate;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

impl ProxFunction for MaxCoord {
    fn value(&self, x: &Vector) -> f64 {
        x.max()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        // The conjugate of max is the simplex indicator.
        x - project_simplex(&(x / t)) * t
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `weight·dist(x, R^n_+) = weight·‖min(x, 0)‖`.
#[derive(Clone, Copy, Debug)]
pub struct DistToNonnegOrthant {
    pub weight: f64,
}

impl ProxFunction for DistToNonnegOrthant {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.map(|v| v.min(0.0)).norm()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        let neg = x.map(|v| v.min(0.0));
        let d = neg.norm();
        let lambda = t * self.weight;
        if d == 0.0 {
            x.clone()
        } else {
            x - neg * (lambda / d).min(1.0)
        }
    }
    fn lipschitz(&self) -> Option<f64> {
        Some(self.weight)
    }
}

/// `factor·f` for `factor > 0`.
#[derive(Clone, Debug)]
pub struct Scaled {
    pub base: Arc<dyn ProxFunction>,
    pub factor: f64,
}

impl Scaled {
    pub fn new(base: Arc<dyn ProxFunction>, factor: f64) -> Self {
        assert!(factor > 0.0, "scale factor must be positive");
        Self { base, factor }
    }
}

impl ProxFunction for Scaled {
    fn value(&self, x: &Vector) -> f64 {
        self.factor * self.base.value(x)
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        self.base.prox(t * self.factor, x)
    }
    fn lipschitz(&self) -> Option<f64> {
        self.base.lipschitz().map(|l| l * self.factor)
    }
    fn strong_convexity(&self) -> f64 {
        self.base.strong_convexity() * self.factor
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        self.base.gradient(x).map(|g| g * self.factor)
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        self.base.grad_lipschitz().map(|l| l * self.factor)
    }
    fn domain_diameter(&self) -> Option<f64> {
        self.base.domain_diameter()
    }
    fn kind(&self) -> ProxKind {
        self.base.kind()
    }
    fn scalar_prox(&self, t: f64, s: f64) -> f64 {
        self.base.scalar_prox(t * self.factor, s)
    }
    fn scalar_gradient(&self, s: f64) -> Option<f64> {
        self.base.scalar_gradient(s).map(|g| g * self.factor)
    }
}

/// `Σ_b f_b(x_b)` over consecutive coordinate blocks.
#[derive(Clone, Debug)]
pub struct BlockSeparable {
    blocks: Vec<(Arc<dyn ProxFunction>, usize)>,
}

impl BlockSeparable {
    pub fn new(blocks: Vec<(Arc<dyn ProxFunction>, usize)>) -> Self {
        Self { blocks }
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|(_, n)| n).sum()
    }

    pub fn blocks(&self) -> &[(Arc<dyn ProxFunction>, usize)] {
        &self.blocks
    }

    fn segments(&self) -> impl Iterator<Item = (&Arc<dyn ProxFunction>, usize, usize)> {
        let mut start = 0;
        self.blocks.iter().map(move |(f, n)| {
            let s = start;
            start += n;
            (f, s, *n)
        })
    }
}

impl ProxFunction for BlockSeparable {
    fn value(&self, x: &Vector) -> f64 {
        self.segments().map(|(f, s, n)| f.value(&x.rows(s, n).into_owned())).sum()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.len());
        for (f, s, n) in self.segments() {
            let p = f.prox(t, &x.rows(s, n).into_owned());
            out.rows_mut(s, n).copy_from(&p);
        }
        out
    }
    fn lipschitz(&self) -> Option<f64> {
        let mut sq = 0.0;
        for (f, _) in &self.blocks {
            let l = f.lipschitz()?;
            sq += l * l;
        }
        Some(sq.sqrt())
    }
    fn strong_convexity(&self) -> f64 {
        self.blocks.iter().map(|(f, _)| f.strong_convexity()).reduce(f64::min).unwrap_or(0.0)
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        let mut out = Vector::zeros(x.len());
        for (f, s, n) in self.segments() {
            let g = f.gradient(&x.rows(s, n).into_owned())?;
            out.rows_mut(s, n).copy_from(&g);
        }
        Some(out)
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for (f, _) in &self.blocks {
            worst = worst.max(f.grad_lipschitz()?);
        }
        Some(worst)
    }
    fn domain_diameter(&self) -> Option<f64> {
        let mut sq = 0.0;
        for (f, _) in &self.blocks {
            let d = f.domain_diameter()?;
            sq += d * d;
        }
        Some(sq.sqrt())
    }
    fn kind(&self) -> ProxKind {
        self.blocks
            .iter()
            .map(|(f, _)| f.kind())
            .find(|k| matches!(k, ProxKind::Numerical { .. }))
            .unwrap_or(ProxKind::ClosedForm)
    }
}

/// `g(z) + (weight/2)‖z − center‖²`.
#[derive(Clone, Debug)]
pub struct QuadraticallyRegularized {
    pub base: Arc<dyn ProxFunction>,
    pub center: Vector,
    pub weight: f64,
}

impl ProxFunction for QuadraticallyRegularized {
    fn value(&self, x: &Vector) -> f64 {
        self.base.value(x) + 0.5 * self.weight * (x - &self.center).norm_squared()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        let s = 1.0 + t * self.weight;
        let shifted = (x + &self.center * (t * self.weight)) / s;
        self.base.prox(t / s, &shifted)
    }
    fn strong_convexity(&self) -> f64 {
        self.base.strong_convexity() + self.weight
    }
    fn gradient(&self, x: &Vector) -> Option<Vector> {
        self.base.gradient(x).map(|g| g + (x - &self.center) * self.weight)
    }
    fn grad_lipschitz(&self) -> Option<f64> {
        self.base.grad_lipschitz().map(|l| l + self.weight)
    }
    fn domain_diameter(&self) -> Option<f64> {
        self.base.domain_diameter()
    }
    fn kind(&self) -> ProxKind {
        self.base.kind()
    }
}

/// A separable sum `Σ_i f(x_i)` of a convex scalar function given by its
/// value and a monotone subgradient selection; the prox is found by
/// bisection on the optimality condition `f'(z) + (z − x)/t = 0`.
#[derive(Clone)]
pub struct NumericalScalar {
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lipschitz: Option<f64>,
    pub dim: usize,
    pub tol: f64,
}

impl std::fmt::Debug for NumericalScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NumericalScalar")
            .field("lipschitz", &self.lipschitz)
            .field("dim", &self.dim)
            .field("tol", &self.tol)
            .finish_non_exhaustive()
    }
}

impl NumericalScalar {
    pub fn new(
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: Option<f64>,
        dim: usize,
    ) -> Self {
        Self { f: Arc::new(f), df: Arc::new(df), lipschitz, dim, tol: 1e-12 }
    }

    fn prox_scalar(&self, t: f64, x: f64) -> f64 {
        let residual = |z: f64| (self.df)(z) + (z - x) / t;
        let mut width = 1.0 + x.abs();
        let (mut lo, mut hi) = (x - width, x + width);
        while residual(lo) > 0.0 {
            width *= 2.0;
            lo = x - width;
        }
        while residual(hi) < 0.0 {
            width *= 2.0;
            hi = x + width;
        }
        let target = self.tol * (1.0 + x.abs());
        while hi - lo > target {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

impl ProxFunction for NumericalScalar {
    fn value(&self, x: &Vector) -> f64 {
        x.iter().map(|&v| (self.f)(v)).sum()
    }
    fn prox(&self, t: f64, x: &Vector) -> Vector {
        x.map(|v| self.prox_scalar(t, v))
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz.map(|l| l * (self.dim as f64).sqrt())
    }
    fn kind(&self) -> ProxKind {
        ProxKind::Numerical { tol: self.tol }
    }
}
