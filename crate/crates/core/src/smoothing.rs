//! Smoothing `h` by its Moreau envelope to transfer stationarity, and a
//! fixed-budget driver with a predetermined number of inner iterations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fast_gradient::{optimal_method_bound, optimal_method_run};
use crate::linalg::Vector;
use crate::oracle::Oracle;
use crate::problem::CompositeProblem;
use crate::prox::MoreauEnvelope;
use crate::prox_linear::{
    run_coupled, run_inexact_dual_stationary, ErrorSchedule, FgmSubscheme, InnerSolver, OuterLoop, ProxLinearConfig,
    StepReport,
};
use crate::subproblem::prox_gradient;
use crate::trace::{StopReason, Trace};

/// `F^ν = g + h_ν∘c`: same `L`, outer gradient `1/ν`-Lipschitz.
pub fn make_smoothed(problem: &CompositeProblem, nu: f64) -> Result<CompositeProblem> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter(format!("smoothing parameter {nu}")));
    }
    let h = Arc::new(MoreauEnvelope::new(problem.h().clone(), nu));
    CompositeProblem::with_constants(
        problem.g().clone(),
        h,
        problem.c().clone(),
        problem.lipschitz(),
        problem.beta(),
        problem.opnorm_bound(),
    )
}

/// Smoothing parameter and step chosen so that `‖G^ν_t(x)‖ ≤ ε/2` implies
/// `‖G_t(x)‖ ≤ ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingPlan {
    pub eps_target: f64,
    /// `1/μ`.
    pub t: f64,
    /// `ε²/(2L³β)`.
    pub nu: f64,
    /// `ε/2`.
    pub inner_eps_target: f64,
    pub lipschitz: f64,
}

impl SmoothingPlan {
    pub fn new(problem: &CompositeProblem, eps: f64) -> Result<Self> {
        let (l, beta) = (problem.lipschitz(), problem.beta());
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("target accuracy {eps}")));
        }
        if !(l > 0.0 && beta > 0.0) {
            return Err(Error::InvalidParameter("smoothing needs L > 0 and beta > 0".into()));
        }
        Ok(Self {
            eps_target: eps,
            t: 1.0 / (l * beta),
            nu: eps * eps / (2.0 * l * l * l * beta),
            inner_eps_target: 0.5 * eps,
            lipschitz: l,
        })
    }

    /// `√(L²ν/(2t))`, the loss in the prox-gradient comparison.
    pub fn comparison_gap(&self) -> f64 {
        comparison_gap(self.lipschitz, self.nu, self.t)
    }

    /// Inner accuracies `tε²/(64L·k²)`, which keep the dual-residual part
    /// of the surrogate below `ε²/8`.
    pub fn inner_schedule(&self) -> ErrorSchedule {
        ErrorSchedule::InverseSquare { scale: self.t * self.eps_target * self.eps_target / (64.0 * self.lipschitz) }
    }
}

/// `√(L²ν/(2t))`.
pub fn comparison_gap(lipschitz: f64, nu: f64, t: f64) -> f64 {
    (lipschitz * lipschitz * nu / (2.0 * t)).sqrt()
}

/// `‖G_t(x)‖ ≤ ‖G^ν_t(x)‖ + √(L²ν/(2t))` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonCheck {
    pub original: f64,
    pub smoothed: f64,
    pub gap: f64,
}

impl ComparisonCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.original <= self.smoothed + self.gap + slack
    }
}

/// Both prox-gradients at `x` from exact solves on uncounted oracles.
pub fn prox_gradient_comparison(
    problem: &CompositeProblem,
    smoothed: &CompositeProblem,
    nu: f64,
    x: &Vector,
    t: f64,
) -> Result<ComparisonCheck> {
    let original = prox_gradient(&Oracle::new(problem), x, t)?.0.norm();
    let smooth = prox_gradient(&Oracle::new(smoothed), x, t)?.0.norm();
    Ok(ComparisonCheck { original, smoothed: smooth, gap: comparison_gap(problem.lipschitz(), nu, t) })
}

/// Subsolver for the smoothed problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SmoothedInner {
    /// Dual fast gradient with small subgradients.
    FgmDual,
    /// Primal fast gradient for a fixed count per step.
    FgmPrimal,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedOptions {
    pub max_outer: usize,
    /// Evaluate the comparison at every outer iterate.
    pub record_comparisons: bool,
    pub timing: bool,
}

impl Default for SmoothedOptions {
    fn default() -> Self {
        Self { max_outer: 10_000, record_comparisons: false, timing: false }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothedRun {
    pub x: Vector,
    /// Trace of the run on the smoothed problem.
    pub trace: Trace,
    /// `‖G_{1/μ}(x)‖` of the original problem, from an exact solve.
    pub true_norm: f64,
    /// One entry per outer iterate when requested.
    pub comparisons: Vec<ComparisonCheck>,
}

/// Runs inexact prox-linear steps on `F^ν` until the smoothed surrogate is
/// at most `ε/2`, then certifies `‖G_{1/μ}(x)‖ ≤ ε` on the original problem.
pub fn run_smoothed_driver(
    problem: &CompositeProblem,
    x0: &Vector,
    plan: &SmoothingPlan,
    inner: SmoothedInner,
    opts: &SmoothedOptions,
) -> Result<SmoothedRun> {
    let smoothed = make_smoothed(problem, plan.nu)?;
    let cfg = ProxLinearConfig {
        t: Some(plan.t),
        schedule: plan.inner_schedule(),
        max_outer: opts.max_outer,
        tol: plan.inner_eps_target,
        inner: InnerSolver::FgmDual,
        record_true: opts.record_comparisons,
        timing: opts.timing,
        ..ProxLinearConfig::default()
    };
    let trace = match inner {
        SmoothedInner::FgmDual => run_inexact_dual_stationary(&smoothed, x0, &cfg)?,
        SmoothedInner::FgmPrimal => {
            run_coupled(&smoothed, x0, &ProxLinearConfig { schedule: ErrorSchedule::Zero, ..cfg }, &FgmSubscheme)?
        }
    };
    if trace.stop != StopReason::Tolerance {
        return Err(Error::BudgetExhausted {
            iters: trace.n_steps(),
            target: plan.inner_eps_target,
            reached: trace.min_prox_grad_norm(),
        });
    }
    let mut comparisons = Vec::new();
    if opts.record_comparisons {
        let audit = Oracle::new(problem);
        for (r, x) in trace.records.iter().zip(&trace.points) {
            let original = prox_gradient(&audit, x, plan.t)?.0.norm();
            let smooth = r.prox_grad_true.ok_or(Error::CertificateMissing { target: plan.inner_eps_target })?;
            comparisons.push(ComparisonCheck { original, smoothed: smooth, gap: plan.comparison_gap() });
        }
    }
    let x = trace.certified_point().clone();
    let true_norm = prox_gradient(&Oracle::new(problem), &x, plan.t)?.0.norm();
    if true_norm > plan.eps_target {
        return Err(Error::CertificateMissing { target: plan.eps_target });
    }
    Ok(SmoothedRun { x, trace, true_norm, comparisons })
}

/// Fixed split of `T` optimal-method iterations over `N + 1` outer steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetPlan {
    /// Estimate of `F(x₀) − inf F`.
    pub q: f64,
    pub total: usize,
    /// Last outer index `N`; `N + 1` steps are taken.
    pub n_outer: usize,
    pub per_step_inner: usize,
    pub lipschitz: f64,
    pub beta: f64,
    pub opnorm: f64,
}

impl BudgetPlan {
    pub fn new(total: usize, q: f64, lipschitz: f64, beta: f64, opnorm: f64) -> Result<Self> {
        let finite_pos = |v: f64| v > 0.0 && v.is_finite();
        if !(finite_pos(q) && finite_pos(lipschitz) && finite_pos(beta) && finite_pos(opnorm)) {
            return Err(Error::InvalidParameter(format!(
                "budget plan needs positive finite q={q}, L={lipschitz}, beta={beta}, opnorm={opnorm}"
            )));
        }
        let rate = (2.0 * beta * q / lipschitz).sqrt() / (4.0 * opnorm);
        let required = 1.5f64.powf(1.5) / rate;
        if (total as f64) < required {
            return Err(Error::BudgetTooSmall { total, required });
        }
        let k = total as f64 * rate;
        let mut n_outer = (k.powf(2.0 / 3.0).ceil() as usize).saturating_sub(2);
        let per_step = |n: usize| {
            let x = 4.0 * opnorm * (lipschitz * (n as f64 + 1.0) / (2.0 * beta * q)).sqrt();
            ((x.ceil() as usize).saturating_sub(1)).max(1)
        };
        while n_outer > 0 && (n_outer + 1) * per_step(n_outer) > total {
            n_outer -= 1;
        }
        let per_step_inner = per_step(n_outer);
        if per_step_inner > total {
            return Err(Error::BudgetTooSmall { total, required: per_step_inner as f64 });
        }
        Ok(Self { q, total, n_outer, per_step_inner, lipschitz, beta, opnorm })
    }

    pub fn for_problem(problem: &CompositeProblem, total: usize, q: f64) -> Result<Self> {
        Self::new(total, q, problem.lipschitz(), problem.beta(), problem.opnorm_bound())
    }

    /// `1/μ`.
    pub fn step(&self) -> f64 {
        1.0 / (self.lipschitz * self.beta)
    }

    /// `4‖∇c‖√(L(N+1)/(2βq))` before rounding.
    pub fn nominal_inner(&self) -> f64 {
        4.0 * self.opnorm * (self.lipschitz * (self.n_outer as f64 + 1.0) / (2.0 * self.beta * self.q)).sqrt()
    }

    /// `q/(N+1)`, the gap every step is guaranteed to reach.
    pub fn eps_per_step(&self) -> f64 {
        self.q / (self.n_outer as f64 + 1.0)
    }

    /// Dual smoothness constant `t‖∇c‖²`.
    pub fn dual_constant(&self) -> f64 {
        self.step() * self.opnorm * self.opnorm
    }

    /// `8lL²/(n+1)²` after `per_step_inner` steps.
    pub fn realized_gap_bound(&self) -> f64 {
        optimal_method_bound(self.per_step_inner, self.dual_constant(), self.lipschitz)
    }

    /// `min_{i<N} ‖G_{1/μ}(x_i)‖² ≤ 2μ(F(x₀) − inf F + q)/N`.
    pub fn stationarity_bound(&self, initial_gap: f64) -> f64 {
        let mu = self.lipschitz * self.beta;
        2.0 * mu * (initial_gap + self.q) / self.n_outer as f64
    }

    /// Smallest `T` with `T ≥ 8‖∇c‖/√(βq/L)·(1 + μ(gap + q)/ε²)^{3/2}`.
    pub fn sufficient_total(initial_gap: f64, q: f64, eps: f64, lipschitz: f64, beta: f64, opnorm: f64) -> usize {
        let mu = lipschitz * beta;
        let t = 8.0 * opnorm / (beta * q / lipschitz).sqrt() * (1.0 + mu * (initial_gap + q) / (eps * eps)).powf(1.5);
        t.ceil() as usize
    }
}

/// `N + 1` inexact steps at `t = 1/μ`, each given exactly `per_step_inner`
/// optimal-method iterations on the dual. Returns the iterate with the
/// smallest reported norm.
pub fn run_budgeted_driver(
    problem: &CompositeProblem,
    x0: &Vector,
    plan: &BudgetPlan,
    record_true: bool,
) -> Result<(Vector, Trace)> {
    let eps = plan.realized_gap_bound();
    if eps > plan.eps_per_step() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "per-step gap bound {eps:e} exceeds q/(N+1) = {:e}",
            plan.eps_per_step()
        )));
    }
    let cfg = ProxLinearConfig {
        t: Some(plan.step()),
        max_outer: plan.n_outer + 1,
        record_true,
        ..ProxLinearConfig::default()
    };
    let mut outer = OuterLoop::new(problem, x0, &cfg)?;
    let t = outer.t;
    let l = plan.dual_constant();
    let mut warm: Option<Vector> = None;
    let mut used = 0usize;
    for _ in 0..=plan.n_outer {
        let prox_grad_true = outer.true_norm()?;
        let report = {
            let model = outer.model()?;
            let run = optimal_method_run(&model.dual(), plan.per_step_inner, l, warm.as_ref())?;
            let step = (&run.v - &outer.x).norm() / t;
            let surrogate = (4.0 * eps / t + 2.0 * step * step).sqrt();
            StepReport { x_next: run.v, surrogate, eps, inner_iters: plan.per_step_inner, dual: Some(run.w) }
        };
        used += report.inner_iters;
        assert!(used <= plan.total, "inner budget exceeded: {used} > {}", plan.total);
        warm = report.dual.clone();
        outer.advance(report, prox_grad_true, |_| -eps)?;
    }
    let trace = outer.finish_with(StopReason::Budget);
    let best = trace
        .records
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.prox_grad_norm.total_cmp(&b.1.prox_grad_norm))
        .map(|(k, _)| k)
        .unwrap_or(0);
    Ok((trace.points[best].clone(), trace))
}

#[cfg(test)]
mod tests;
