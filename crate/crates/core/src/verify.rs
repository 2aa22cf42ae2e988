//! Independent checks: a Moreau-envelope oracle for the composite objective,
//! the prox-gradient sandwich, near-stationarity certificates, weak-convexity
//! probes and the quadratic penalization principle.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::Oracle;
use crate::problem::CompositeProblem;
use crate::prox::{ProxFunction, QuadraticallyRegularized};
use crate::rng::{seeded, uniform_vector};
use crate::subproblem::{prox_gradient, solve_exact, Certificate, LinearizedModel};

pub use crate::smooth::finite_diff_jacobian_check;

/// Default cap on prox-linear steps inside the oracle.
pub const ORACLE_MAX_STEPS: usize = 10_000;

/// Evaluates `prox_{νF}` for `ν < 1/μ`.
///
/// `z ↦ F(z) + ‖z − x‖²/(2ν)` is `(1/ν − μ)`-strongly convex. It is minimized
/// by exact prox-linear steps with `t = 1/(μ + 1/ν)` on the problem whose
/// simple part absorbs the quadratic. Each step contracts the distance to the
/// minimizer by `√q`, `q = (2μν + 1)/3`, so a step `s` certifies the gap
/// `(μ + 1/t)·s²/(2(1 − √q)²)`.
#[derive(Clone, Debug)]
pub struct EnvelopeOracle<'p> {
    problem: &'p CompositeProblem,
    nu: f64,
    tol: f64,
    max_steps: usize,
}

/// `x̂ = prox_{νF}(x)` with its certificate.
#[derive(Clone, Debug)]
pub struct ProxPoint {
    pub x_hat: Vector,
    /// Certified `Φ(x̂) − min Φ` for `Φ = F + ‖· − x‖²/(2ν)`.
    pub gap: f64,
    /// Certified `‖x̂ − prox_{νF}(x)‖`.
    pub dist: f64,
    pub steps: usize,
}

impl<'p> EnvelopeOracle<'p> {
    pub fn new(problem: &'p CompositeProblem, nu: f64, tol: f64) -> Result<Self> {
        let mu = problem.mu();
        if !(nu > 0.0 && nu * mu < 1.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("envelope parameter {nu} needs 0 < nu < 1/mu = {}", 1.0 / mu)));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("oracle tolerance {tol}")));
        }
        Ok(Self { problem, nu, tol, max_steps: ORACLE_MAX_STEPS })
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// `1/ν − μ`.
    pub fn strong_convexity(&self) -> f64 {
        1.0 / self.nu - self.problem.mu()
    }

    /// `prox_{νF}(x)` to functional gap `tol`.
    pub fn composite_prox_point(&self, x: &Vector) -> Result<ProxPoint> {
        let mu = self.problem.mu();
        let inv_nu = 1.0 / self.nu;
        let regularized = self.problem.with_g(Arc::new(QuadraticallyRegularized {
            base: self.problem.g().clone(),
            center: x.clone(),
            weight: inv_nu,
        }));
        let oracle = Oracle::new(&regularized);
        let t = 1.0 / (mu + inv_nu);
        let k = mu + 1.0 / t;
        let sigma = self.strong_convexity();
        let root_q = (k / (sigma + 1.0 / t + inv_nu)).sqrt();
        let mut z = self.problem.g().prox(1.0, x);
        if !self.problem.g().value(&z).is_finite() {
            return Err(Error::InvalidParameter("prox point start outside dom g".into()));
        }
        let mut warm: Option<Vector> = None;
        let mut last_gap = f64::INFINITY;
        for step in 1..=self.max_steps {
            let model = LinearizedModel::new(&oracle, &z, t)?;
            let sol = solve_exact(&model, warm.as_ref())?;
            let inner = match sol.certificate {
                Certificate::FunctionGap(g) => g,
                _ => 0.0,
            };
            let s = (&sol.x - &z).norm();
            let gap = k * s * s / (2.0 * (1.0 - root_q).powi(2)) + inner;
            warm = Some(sol.dual);
            z = sol.x;
            last_gap = gap;
            if gap <= self.tol {
                let dist = (2.0 * gap / sigma).sqrt();
                return Ok(ProxPoint { x_hat: z, gap, dist, steps: step });
            }
        }
        Err(Error::BudgetExhausted { iters: self.max_steps, target: self.tol, reached: last_gap })
    }

    /// `∇F_ν(x) = (x − prox_{νF}(x))/ν` and the certified error of its norm.
    pub fn envelope_gradient(&self, x: &Vector) -> Result<(Vector, f64)> {
        let p = self.composite_prox_point(x)?;
        Ok(((x - &p.x_hat) / self.nu, p.dist / self.nu))
    }
}

/// Constants `(lower, upper)` with
/// `lower·‖∇F_{t/(1+tμ)}‖ ≤ ‖G_t‖ ≤ upper·‖∇F_{t/(1+tμ)}‖`.
pub fn sandwich_constants(t: f64, mu: f64) -> (f64, f64) {
    let tm = t * mu;
    let lower = 1.0 / ((1.0 + tm) * (1.0 + tm.sqrt()));
    let upper = (1.0 + 2.0 * tm) / (1.0 + tm) * ((tm / (1.0 + tm)).sqrt() + 1.0);
    (lower, upper)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichCheck {
    pub envelope_grad_norm: f64,
    /// Certified error in `envelope_grad_norm`.
    pub envelope_error: f64,
    pub prox_grad_norm: f64,
    pub lower: f64,
    pub upper: f64,
    pub lhs_ok: bool,
    pub rhs_ok: bool,
}

impl SandwichCheck {
    pub fn holds(&self) -> bool {
        self.lhs_ok && self.rhs_ok
    }
}

/// Both sandwich inequalities at `x`, with relative slack `rel` on top of
/// the oracle's certified error.
pub fn check_sandwich(problem: &CompositeProblem, x: &Vector, t: f64, tol: f64, rel: f64) -> Result<SandwichCheck> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {t}")));
    }
    let mu = problem.mu();
    let oracle = EnvelopeOracle::new(problem, t / (1.0 + t * mu), tol)?;
    let (grad, err) = oracle.envelope_gradient(x)?;
    let env = grad.norm();
    let g = prox_gradient(&Oracle::new(problem), x, t)?.0.norm();
    let (lower, upper) = sandwich_constants(t, mu);
    let lhs_ok = lower * (env - err).max(0.0) <= g * (1.0 + rel) + f64::EPSILON;
    let rhs_ok = g <= upper * (env + err) * (1.0 + rel) + f64::EPSILON;
    Ok(SandwichCheck { envelope_grad_norm: env, envelope_error: err, prox_grad_norm: g, lower, upper, lhs_ok, rhs_ok })
}

/// Certificate at `x` from `x̂ = prox_{F/(2μ)}(x)`: `‖x̂ − x‖ ≤ (2/μ)‖G‖`,
/// `F(x̂) ≤ F(x)` and `dist(0; ∂F(x̂)) ≤ 4‖G‖` with `G = G_{1/μ}(x)`.
#[derive(Clone, Debug)]
pub struct NearStationarity {
    pub x_hat: Vector,
    pub prox_grad_norm: f64,
    pub dist: f64,
    pub dist_bound: f64,
    /// `F(x) − F(x̂)`.
    pub value_drop: f64,
    /// Norm of the subgradient `2μ(x − x̂) ∈ ∂F(x̂)`.
    pub subgradient_norm: f64,
    pub subgradient_bound: f64,
    /// Certified error in `dist`.
    pub error: f64,
}

impl NearStationarity {
    /// All three lines, with relative slack `rel` beyond the certified error.
    pub fn holds(&self, rel: f64) -> bool {
        let mu2 = self.subgradient_norm / self.dist.max(f64::MIN_POSITIVE);
        self.dist <= self.dist_bound * (1.0 + rel) + self.error
            && self.value_drop >= -rel * (1.0 + self.value_drop.abs())
            && self.subgradient_norm <= self.subgradient_bound * (1.0 + rel) + mu2 * self.error
    }
}

pub fn near_stationarity_certificate(problem: &CompositeProblem, x: &Vector, tol: f64) -> Result<NearStationarity> {
    let mu = problem.mu();
    if !(mu > 0.0) {
        return Err(Error::InvalidParameter("certificate needs mu > 0".into()));
    }
    let nu = 0.5 / mu;
    let p = EnvelopeOracle::new(problem, nu, tol)?.composite_prox_point(x)?;
    let g = prox_gradient(&Oracle::new(problem), x, 1.0 / mu)?.0.norm();
    let f = Oracle::new(problem);
    let dist = (&p.x_hat - x).norm();
    Ok(NearStationarity {
        prox_grad_norm: g,
        dist,
        dist_bound: 2.0 / mu * g,
        value_drop: f.objective(x)? - f.objective(&p.x_hat)?,
        subgradient_norm: dist / nu,
        subgradient_bound: 4.0 * g,
        error: p.dist,
        x_hat: p.x_hat,
    })
}

/// Largest sampled violation of
/// `f(ax + (1−a)y) ≤ a f(x) + (1−a) f(y) + (ρ/2)a(1−a)‖x − y‖²` over pairs drawn
/// uniformly from the box `center ± radius`.
pub fn weak_convexity_probe(
    f: impl Fn(&Vector) -> f64,
    rho: f64,
    center: &Vector,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> f64 {
    let mut rng = seeded(seed);
    let d = center.len();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let x = center + uniform_vector(&mut rng, d, -radius, radius);
        let y = center + uniform_vector(&mut rng, d, -radius, radius);
        let a: f64 = rng.gen_range(0.0..=1.0);
        let mid = &x * a + &y * (1.0 - a);
        let v = f(&mid) - (a * f(&x) + (1.0 - a) * f(&y) + 0.5 * rho * a * (1.0 - a) * (&x - &y).norm_squared());
        worst = worst.max(v);
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PenalizationCheck {
    /// `‖λ⁻¹(x − prox_{λf}(x))‖`.
    pub step_norm: f64,
    /// `√(2ε/λ)`.
    pub plain_bound: f64,
    /// `√(ε/(λ(1 + λα/2)))`.
    pub strong_bound: f64,
}

impl PenalizationCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.step_norm <= self.plain_bound + slack && self.step_norm <= self.strong_bound + slack
    }
}

/// Step of `prox_{λf}` at a point with `f(x) − inf f ≤ eps_gap`, against both
/// bounds; `alpha` is a strong-convexity modulus of `f` (possibly 0).
pub fn quadratic_penalization_check(
    f: &dyn ProxFunction,
    x: &Vector,
    lambda: f64,
    eps_gap: f64,
    alpha: f64,
) -> Result<PenalizationCheck> {
    if !(lambda > 0.0 && eps_gap >= 0.0 && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda={lambda}, eps={eps_gap}, alpha={alpha}")));
    }
    let step_norm = (x - f.prox(lambda, x)).norm() / lambda;
    Ok(PenalizationCheck {
        step_norm,
        plain_bound: (2.0 * eps_gap / lambda).sqrt(),
        strong_bound: (eps_gap / (lambda * (1.0 + 0.5 * lambda * alpha))).sqrt(),
    })
}

/// Central-difference gradient of `f` with step `h`.
pub fn central_difference_gradient(f: impl Fn(&Vector) -> f64, x: &Vector, h: f64) -> Vector {
    let mut g = Vector::zeros(x.len());
    let mut e = x.clone();
    for i in 0..x.len() {
        e[i] = x[i] + h;
        let up = f(&e);
        e[i] = x[i] - h;
        let down = f(&e);
        e[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

#[cfg(test)]
mod tests;
