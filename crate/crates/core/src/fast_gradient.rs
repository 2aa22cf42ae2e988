//! First-order inner solvers for `min f(x) + p(x)` with `f` smooth and `p`
//! prox-friendly: Nesterov's estimate-sequence method, its variant that
//! exhibits a small subgradient, and the optimal primal-dual method used on
//! prox-linear duals.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, Matrix, Vector};
use crate::prox::ProxFunction;
use crate::subproblem::DualModel;

/// `f + p` with `f` convex and `L_f`-smooth, `p` closed and `α`-strongly convex.
pub trait AdditiveComposite {
    fn dim(&self) -> usize;
    fn smooth_value(&self, x: &Vector) -> Result<f64>;
    fn smooth_gradient(&self, x: &Vector) -> Result<Vector>;
    /// `L_f`.
    fn smooth_lipschitz(&self) -> f64;
    fn simple_value(&self, x: &Vector) -> Result<f64>;
    /// `prox_{t p}`.
    fn simple_prox(&self, t: f64, x: &Vector) -> Result<Vector>;
    /// `α`.
    fn strong_convexity(&self) -> f64;

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(self.smooth_value(x)? + self.simple_value(x)?)
    }
}

/// `½xᵀQx + ⟨q, x⟩ + p(x)` with `Q` symmetric positive semidefinite.
#[derive(Clone, Debug)]
pub struct QuadraticComposite {
    pub hessian: Matrix,
    pub linear: Vector,
    pub simple: Arc<dyn ProxFunction>,
    lipschitz: f64,
}

impl QuadraticComposite {
    pub fn new(hessian: Matrix, linear: Vector, simple: Arc<dyn ProxFunction>) -> Self {
        let lipschitz = hessian.clone().symmetric_eigenvalues().max().max(0.0);
        Self { hessian, linear, simple, lipschitz }
    }

    /// Overrides `L_f` with any upper bound on the largest Hessian eigenvalue.
    pub fn with_lipschitz(mut self, lipschitz: f64) -> Self {
        self.lipschitz = lipschitz;
        self
    }
}

impl AdditiveComposite for QuadraticComposite {
    fn dim(&self) -> usize {
        self.linear.len()
    }
    fn smooth_value(&self, x: &Vector) -> Result<f64> {
        Ok(0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x))
    }
    fn smooth_gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(&self.hessian * x + &self.linear)
    }
    fn smooth_lipschitz(&self) -> f64 {
        self.lipschitz
    }
    fn simple_value(&self, x: &Vector) -> Result<f64> {
        Ok(self.simple.value(x))
    }
    fn simple_prox(&self, t: f64, x: &Vector) -> Result<Vector> {
        Ok(self.simple.prox(t, x))
    }
    fn strong_convexity(&self) -> f64 {
        self.simple.strong_convexity()
    }
}

/// The dual of a prox-linear subproblem: `f = s`, `p = (h/α)⋆`.
impl AdditiveComposite for DualModel<'_, '_> {
    fn dim(&self) -> usize {
        self.dim()
    }
    fn smooth_value(&self, w: &Vector) -> Result<f64> {
        Ok(self.smooth_value_and_gradient(w)?.0)
    }
    fn smooth_gradient(&self, w: &Vector) -> Result<Vector> {
        Ok(self.gradient(w)?.0)
    }
    fn smooth_lipschitz(&self) -> f64 {
        self.ell()
    }
    fn simple_value(&self, w: &Vector) -> Result<f64> {
        self.conjugate_value(w)
    }
    fn simple_prox(&self, t: f64, w: &Vector) -> Result<Vector> {
        if t == 0.0 {
            return Ok(w.clone());
        }
        self.prox_conjugate(t, w)
    }
    fn strong_convexity(&self) -> f64 {
        self.conjugate_strong_convexity()
    }
}

/// When an FGM run stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StoppingRule {
    Iterations(usize),
    /// `f^p(x_j) − optimum ≤ eps`; the optimum must be known.
    FunctionGap {
        optimum: f64,
        eps: f64,
        max_iters: usize,
    },
    /// Certified subgradient of norm `≤ eps` at the extra prox-gradient point.
    Residual {
        eps: f64,
        max_iters: usize,
    },
}

/// Positive root of `a²/(θ + a) = 2(1 + αθ)/L_f`.
pub fn fgm_weight(theta: f64, alpha: f64, l_f: f64) -> f64 {
    let k = 2.0 * (1.0 + alpha * theta) / l_f;
    0.5 * (k + (k * k + 4.0 * k * theta).sqrt())
}

/// Rate bound `(1 + √(α/(2L_f)))^{−2(j−1)}·(L_f/4)·dist²` for `j ≥ 1`.
pub fn fgm_gap_bound(j: usize, alpha: f64, l_f: f64, dist_sq: f64) -> f64 {
    let q = 1.0 + (alpha / (2.0 * l_f)).sqrt();
    q.powf(-2.0 * (j as f64 - 1.0)) * l_f / 4.0 * dist_sq
}

/// Iterations after which the function gap is at most `eps`.
pub fn fgm_gap_iterations(alpha: f64, l_f: f64, dist_sq: f64, eps: f64) -> f64 {
    1.0 + (l_f / (2.0 * alpha)).sqrt() * (l_f * dist_sq / (4.0 * eps)).ln()
}

/// Iterations after which the small-subgradient variant certifies `eps`.
pub fn fgm_residual_iterations(alpha: f64, l_f: f64, dist_sq: f64, eps: f64) -> f64 {
    1.0 + (l_f / (2.0 * alpha)).sqrt() * (2.0 * l_f * l_f * dist_sq / (eps * eps)).ln()
}

#[derive(Clone, Debug)]
pub struct FgmIterate {
    pub j: usize,
    pub x: Vector,
    pub theta: f64,
}

#[derive(Clone, Debug)]
pub struct FgmRun {
    /// Last iterate `x_J`.
    pub x: Vector,
    /// `x_0, …, x_J` with the accumulated weights `θ_j`.
    pub iterates: Vec<FgmIterate>,
    pub grad_evals: usize,
    pub prox_evals: usize,
}

impl FgmRun {
    pub fn iters(&self) -> usize {
        self.iterates.len() - 1
    }
}

/// Estimate-sequence state: `ψ_j(x) = ½‖x − x₀‖² + ⟨s, x⟩ + θ p(x) + const`.
struct EstimateSequence<'i> {
    inst: &'i dyn AdditiveComposite,
    l_f: f64,
    alpha: f64,
    x0: Vector,
    s: Vector,
    theta: f64,
    x: Vector,
    grad_evals: usize,
    prox_evals: usize,
}

impl<'i> EstimateSequence<'i> {
    fn new(inst: &'i dyn AdditiveComposite, x0: &Vector) -> Result<Self> {
        let l_f = inst.smooth_lipschitz();
        if !(l_f > 0.0 && l_f.is_finite()) {
            return Err(Error::InvalidParameter(format!("smooth Lipschitz constant {l_f}")));
        }
        Ok(Self {
            inst,
            l_f,
            alpha: inst.strong_convexity(),
            x0: x0.clone(),
            s: Vector::zeros(x0.len()),
            theta: 0.0,
            x: x0.clone(),
            grad_evals: 0,
            prox_evals: 0,
        })
    }

    fn prox_grad(&mut self, y: &Vector, grad_y: &Vector) -> Result<Vector> {
        self.prox_evals += 1;
        self.inst.simple_prox(1.0 / self.l_f, &(y - grad_y / self.l_f))
    }

    fn gradient(&mut self, x: &Vector) -> Result<Vector> {
        self.grad_evals += 1;
        let g = self.inst.smooth_gradient(x)?;
        ensure_finite(&g, "smooth gradient")?;
        Ok(g)
    }

    /// One step; returns `∇f(x_{j+1})`.
    fn step(&mut self) -> Result<Vector> {
        let a = fgm_weight(self.theta, self.alpha, self.l_f);
        let theta_next = self.theta + a;
        let v = if self.theta == 0.0 {
            &self.x0 - &self.s
        } else {
            self.prox_evals += 1;
            self.inst.simple_prox(self.theta, &(&self.x0 - &self.s))?
        };
        let y = (&self.x * self.theta + &v * a) / theta_next;
        let grad_y = self.gradient(&y)?;
        let x_next = self.prox_grad(&y, &grad_y)?;
        let grad_x = self.gradient(&x_next)?;
        self.s += &grad_x * a;
        self.theta = theta_next;
        self.x = x_next;
        Ok(grad_x)
    }
}

/// Runs the estimate-sequence method from `x0`; returns the last iterate.
pub fn fgm_run(inst: &dyn AdditiveComposite, x0: &Vector, stop: StoppingRule) -> Result<FgmRun> {
    if let StoppingRule::Residual { eps, max_iters } = stop {
        let r = fgm_run_small_subgradient(inst, x0, eps, max_iters)?;
        return Ok(r.run);
    }
    let mut es = EstimateSequence::new(inst, x0)?;
    let mut iterates = vec![FgmIterate { j: 0, x: x0.clone(), theta: 0.0 }];
    let (max_iters, gap_target) = match stop {
        StoppingRule::Iterations(n) => (n, None),
        StoppingRule::FunctionGap { optimum, eps, max_iters } => (max_iters, Some((optimum, eps))),
        StoppingRule::Residual { .. } => unreachable!("handled above"),
    };
    let reached = |x: &Vector| -> Result<Option<f64>> {
        match gap_target {
            Some((opt, eps)) => {
                let gap = inst.value(x)? - opt;
                Ok(if gap <= eps { None } else { Some(gap) })
            }
            None => Ok(Some(f64::INFINITY)),
        }
    };
    let mut last_gap = f64::INFINITY;
    if gap_target.is_some() {
        match reached(x0)? {
            None => {
                return Ok(FgmRun { x: x0.clone(), iterates, grad_evals: 0, prox_evals: 0 });
            }
            Some(g) => last_gap = g,
        }
    }
    for j in 1..=max_iters {
        es.step()?;
        iterates.push(FgmIterate { j, x: es.x.clone(), theta: es.theta });
        if gap_target.is_some() {
            match reached(&es.x)? {
                None => {
                    return Ok(FgmRun {
                        x: es.x.clone(),
                        iterates,
                        grad_evals: es.grad_evals,
                        prox_evals: es.prox_evals,
                    });
                }
                Some(g) => last_gap = g,
            }
        }
    }
    if let Some((_, eps)) = gap_target {
        return Err(Error::BudgetExhausted { iters: max_iters, target: eps, reached: last_gap });
    }
    Ok(FgmRun { x: es.x, iterates, grad_evals: es.grad_evals, prox_evals: es.prox_evals })
}

#[derive(Clone, Debug)]
pub struct SmallSubgradient {
    /// `x̂ = prox_{p/L_f}(x − ∇f(x)/L_f)` at the last iterate `x`.
    pub x_hat: Vector,
    /// `L_f(x − x̂) + ∇f(x̂) − ∇f(x) ∈ ∂(f + p)(x̂)`.
    pub subgradient: Vector,
    /// `2L_f‖x̂ − x‖ ≥ ‖subgradient‖`.
    pub residual_bound: f64,
    /// The FGM iterates `x_j`.
    pub run: FgmRun,
    /// `(x_j, x̂_j, bound_j)` for every iterate, for auditing.
    pub history: Vec<(Vector, Vector, f64)>,
}

impl SmallSubgradient {
    pub fn iters(&self) -> usize {
        self.run.iters()
    }
}

/// FGM with an extra prox-gradient step per iterate, stopped as soon as
/// `2L_f‖x̂_j − x_j‖ ≤ eps`.
pub fn fgm_run_small_subgradient(
    inst: &dyn AdditiveComposite,
    x0: &Vector,
    eps: f64,
    max_iters: usize,
) -> Result<SmallSubgradient> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("residual target {eps}")));
    }
    let mut es = EstimateSequence::new(inst, x0)?;
    let l_f = es.l_f;
    let mut iterates = vec![FgmIterate { j: 0, x: x0.clone(), theta: 0.0 }];
    let mut history = Vec::new();
    let mut grad_x = es.gradient(x0)?;
    let mut best = f64::INFINITY;
    for j in 0..=max_iters {
        if j > 0 {
            grad_x = es.step()?;
            iterates.push(FgmIterate { j, x: es.x.clone(), theta: es.theta });
        }
        let x = es.x.clone();
        let x_hat = es.prox_grad(&x, &grad_x)?;
        let bound = 2.0 * l_f * (&x_hat - &x).norm();
        history.push((x.clone(), x_hat.clone(), bound));
        best = best.min(bound);
        if bound <= eps {
            let grad_hat = es.gradient(&x_hat)?;
            let subgradient = (&x - &x_hat) * l_f + grad_hat - &grad_x;
            let run = FgmRun { x, iterates, grad_evals: es.grad_evals, prox_evals: es.prox_evals };
            return Ok(SmallSubgradient { x_hat, subgradient, residual_bound: bound, run, history });
        }
    }
    Err(Error::BudgetExhausted { iters: max_iters, target: eps, reached: best })
}

/// `a_{j+1} = (√(a_j⁴ + 4a_j²) − a_j²)/2`.
pub fn optimal_method_weight(a: f64) -> f64 {
    let a2 = a * a;
    0.5 * ((a2 * a2 + 4.0 * a2).sqrt() - a2)
}

/// Gap bound `8lL²/(n+1)²` after `n` steps of the optimal method.
pub fn optimal_method_bound(n: usize, l: f64, lipschitz: f64) -> f64 {
    8.0 * l * lipschitz * lipschitz / ((n as f64 + 1.0).powi(2))
}

#[derive(Clone, Debug)]
pub struct OptimalRun {
    /// Primal average after the last step.
    pub v: Vector,
    /// Dual iterate after the last step.
    pub w: Vector,
    /// Primal averages `v_0, …, v_{n−1}`.
    pub primal_history: Vec<Vector>,
}

/// Exactly `n_steps` steps of the Auslender–Teboulle/Tseng method on the
/// dual with constant `l ≥ tα²‖∇c(y)‖²`, from `warm` or `prox_{(h/α)⋆/l}(0)`.
pub fn optimal_method_run(
    dual: &DualModel<'_, '_>,
    n_steps: usize,
    l: f64,
    warm: Option<&Vector>,
) -> Result<OptimalRun> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("optimal method needs at least one step".into()));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::InvalidParameter(format!("dual smoothness constant {l}")));
    }
    let m = dual.dim();
    let start = match warm {
        Some(w) if w.len() == m => dual.prox_conjugate(1.0 / l, w)?,
        _ => dual.prox_conjugate(1.0 / l, &Vector::zeros(m))?,
    };
    let mut w = start.clone();
    let mut z = start;
    let mut a: f64 = 1.0;
    let mut v: Option<Vector> = None;
    let mut primal_history = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        let y = &w * (1.0 - a) + &z * a;
        let (grad_y, x_bar) = dual.gradient(&y)?;
        let sigma = 1.0 / (a * l);
        z = dual.prox_conjugate(sigma, &(&z - grad_y * sigma))?;
        w = &w * (1.0 - a) + &z * a;
        let v_next = match &v {
            None => x_bar * a,
            Some(prev) => prev * (1.0 - a) + x_bar * a,
        };
        primal_history.push(v_next.clone());
        v = Some(v_next);
        a = optimal_method_weight(a);
    }
    Ok(OptimalRun { v: v.expect("at least one step"), w, primal_history })
}
