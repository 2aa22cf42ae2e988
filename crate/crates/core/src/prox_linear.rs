//! Outer prox-linear loops: exact steps, steps certified by a model gap, steps
//! certified by dual stationarity, and the coupled scheme that runs a linearly
//! convergent inner method for a fixed number of iterations.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::fast_gradient::{fgm_run, fgm_run_small_subgradient, AdditiveComposite, StoppingRule};
use crate::linalg::Vector;
use crate::oracle::Oracle;
use crate::problem::CompositeProblem;
use crate::subproblem::{
    prox_gradient, solve_exact, solve_to_gap, solve_to_residual, Certificate, LinearizedModel, SubproblemSolution,
    DEFAULT_MAX_DUAL_ITERS,
};
use crate::trace::{IterateRecord, StopReason, Trace};

/// Inner accuracies `ε_k`, indexed from `k = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ErrorSchedule {
    Zero,
    /// `ε₀/k^{1+q}`.
    PowerLaw {
        eps0: f64,
        q: f64,
    },
    /// `scale/k²`.
    InverseSquare {
        scale: f64,
    },
    /// `value` for every `k`; not summable.
    Constant {
        value: f64,
    },
}

impl ErrorSchedule {
    pub fn eps(&self, k: usize) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            ErrorSchedule::Zero => 0.0,
            ErrorSchedule::PowerLaw { eps0, q } => eps0 / k.powf(1.0 + q),
            ErrorSchedule::InverseSquare { scale } => scale / (k * k),
            ErrorSchedule::Constant { value } => value,
        }
    }

    /// `Σ_{j=1}^{n} ε_j`.
    pub fn partial_sum(&self, n: usize) -> f64 {
        (1..=n).map(|j| self.eps(j)).sum()
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorSchedule::Zero => true,
            ErrorSchedule::PowerLaw { eps0, q } => eps0 >= 0.0 && eps0.is_finite() && q.is_finite(),
            ErrorSchedule::InverseSquare { scale } => scale >= 0.0 && scale.is_finite(),
            ErrorSchedule::Constant { value } => value >= 0.0 && value.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("error schedule {self:?}")))
        }
    }
}

/// How each subproblem is solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerSolver {
    /// To the exact tolerance.
    Exact,
    /// Restarted accelerated proximal gradient on the dual.
    DualAccelerated,
    /// Fast gradient with the extra prox-gradient step on the dual.
    FgmDual,
    /// Fast gradient on the primal; cannot certify a gap.
    FgmPrimal,
}

#[derive(Clone, Debug)]
pub struct ProxLinearConfig {
    /// Step size; `None` uses `1/μ`.
    pub t: Option<f64>,
    pub schedule: ErrorSchedule,
    pub max_outer: usize,
    /// Stop once the reported prox-gradient norm is at most this.
    pub tol: f64,
    pub inner: InnerSolver,
    pub max_inner: usize,
    /// Also record `‖G_t(x_k)‖` from an uncounted exact solve.
    pub record_true: bool,
    /// Fail on any violated per-step descent inequality.
    pub check_descent: bool,
    /// Record wall-clock nanoseconds; otherwise zero for reproducible output.
    pub timing: bool,
}

impl Default for ProxLinearConfig {
    fn default() -> Self {
        Self {
            t: None,
            schedule: ErrorSchedule::Zero,
            max_outer: 100,
            tol: 0.0,
            inner: InnerSolver::Exact,
            max_inner: DEFAULT_MAX_DUAL_ITERS,
            record_true: false,
            check_descent: true,
            timing: false,
        }
    }
}

impl ProxLinearConfig {
    pub fn step(&self, problem: &CompositeProblem) -> Result<f64> {
        let t = self.t.unwrap_or_else(|| problem.default_step());
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size {t}")));
        }
        Ok(t)
    }
}

/// Slack `1e-9·(1 + |F|)` on descent inequalities.
pub fn descent_slack(f: f64) -> f64 {
    1e-9 * (1.0 + f.abs())
}

/// What one outer step reports.
pub(crate) struct StepReport {
    pub(crate) x_next: Vector,
    pub(crate) surrogate: f64,
    pub(crate) eps: f64,
    pub(crate) inner_iters: usize,
    pub(crate) dual: Option<Vector>,
}

/// Shared outer-loop bookkeeping: objective values, counters, records, stops.
pub(crate) struct OuterLoop<'p> {
    pub(crate) oracle: Oracle<'p>,
    audit: Oracle<'p>,
    cfg: ProxLinearConfig,
    pub(crate) t: f64,
    start: Instant,
    pub(crate) records: Vec<IterateRecord>,
    points: Vec<Vector>,
    pub(crate) x: Vector,
    c_x: Vector,
    pub(crate) f_x: f64,
}

impl<'p> OuterLoop<'p> {
    pub(crate) fn new(problem: &'p CompositeProblem, x0: &Vector, cfg: &ProxLinearConfig) -> Result<Self> {
        cfg.schedule.validate()?;
        let t = cfg.step(problem)?;
        let oracle = Oracle::new(problem);
        let gx = oracle.g_value(x0)?;
        if gx == f64::INFINITY {
            return Err(Error::InvalidParameter("starting point outside dom g".into()));
        }
        let c_x = oracle.c(x0)?;
        let f_x = gx + oracle.h_value(&c_x)?;
        Ok(Self {
            oracle,
            audit: Oracle::new(problem),
            cfg: cfg.clone(),
            t,
            start: Instant::now(),
            records: Vec::new(),
            points: vec![x0.clone()],
            x: x0.clone(),
            c_x,
            f_x,
        })
    }

    pub(crate) fn model(&self) -> Result<LinearizedModel<'_>> {
        LinearizedModel::from_parts(&self.oracle, self.x.clone(), self.c_x.clone(), self.x.clone(), self.t, 1.0)
    }

    pub(crate) fn true_norm(&self) -> Result<Option<f64>> {
        if !self.cfg.record_true {
            return Ok(None);
        }
        Ok(Some(prox_gradient(&self.audit, &self.x, self.t)?.0.norm()))
    }

    /// Evaluates `F(x_{k+1})`, runs `check(F(x_k), F(x_{k+1}))`, appends the
    /// record and advances. Returns whether to stop.
    pub(crate) fn advance(
        &mut self,
        report: StepReport,
        prox_grad_true: Option<f64>,
        required_drop: impl Fn(f64) -> f64,
    ) -> Result<bool> {
        let k = self.records.len();
        let c_next = self.oracle.c(&report.x_next)?;
        let f_next = self.oracle.g_value(&report.x_next)? + self.oracle.h_value(&c_next)?;
        if self.cfg.check_descent {
            let required = required_drop(self.f_x);
            if self.f_x - f_next < required - descent_slack(self.f_x) {
                return Err(Error::StepIncreasedObjective { k, before: self.f_x, after: f_next, required });
            }
        }
        let step_norm = (&report.x_next - &self.x).norm();
        let wall_ns = if self.cfg.timing { self.start.elapsed().as_nanos() as u64 } else { 0 };
        self.records.push(IterateRecord {
            k,
            f_val: self.f_x,
            prox_grad_norm: report.surrogate,
            prox_grad_true,
            step_norm,
            eps_k: report.eps,
            delta_k: 0.0,
            inner_iters: report.inner_iters,
            counters: self.oracle.counters(),
            wall_ns,
        });
        self.points.push(report.x_next.clone());
        self.x = report.x_next;
        self.c_x = c_next;
        self.f_x = f_next;
        Ok(report.surrogate <= self.cfg.tol)
    }

    pub(crate) fn finish(self, stopped: bool) -> Trace {
        self.finish_with(if stopped { StopReason::Tolerance } else { StopReason::MaxIters })
    }

    pub(crate) fn finish_with(self, stop: StopReason) -> Trace {
        Trace {
            records: self.records,
            points: self.points,
            final_value: self.f_x,
            step: self.t,
            stop,
            counters: self.oracle.counters(),
        }
    }
}

/// Fast gradient with the extra prox-gradient step on the dual, certified by
/// the subgradient it exhibits.
fn fgm_dual_solve(
    model: &LinearizedModel<'_>,
    residual: f64,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<SubproblemSolution> {
    let dual = model.dual();
    let w0 = match warm {
        Some(w) if w.len() == dual.dim() => w.clone(),
        _ => Vector::zeros(dual.dim()),
    };
    let r = fgm_run_small_subgradient(&dual, &w0, residual, max_iters).map_err(|e| match e {
        Error::BudgetExhausted { iters, target, reached } => Error::DualBudgetExhausted { iters, target, reached },
        other => other,
    })?;
    let x = dual.primal(&r.x_hat)?;
    Ok(SubproblemSolution {
        x,
        certificate: Certificate::DualStationarity(r.subgradient.norm()),
        inner_iters: r.iters(),
        dual: r.x_hat,
        zeta: r.subgradient,
    })
}

/// Residual target `‖ζ‖ ≤ eps` with the selected dual solver.
fn solve_residual(
    model: &LinearizedModel<'_>,
    solver: InnerSolver,
    eps: f64,
    warm: Option<&Vector>,
    max_iters: usize,
) -> Result<SubproblemSolution> {
    match solver {
        InnerSolver::FgmDual => {
            if model.oracle().problem().h().is_identity() || model.oracle().problem().lipschitz() == 0.0 {
                return solve_to_residual(model, eps, warm, max_iters);
            }
            fgm_dual_solve(model, eps, warm, max_iters)
        }
        InnerSolver::FgmPrimal => Err(Error::CertificateMissing { target: eps }),
        InnerSolver::Exact | InnerSolver::DualAccelerated => solve_to_residual(model, eps, warm, max_iters),
    }
}

fn certified_gap(sol: &SubproblemSolution, lipschitz: f64) -> f64 {
    match sol.certificate {
        Certificate::ClosedForm => 0.0,
        Certificate::FunctionGap(g) => g,
        Certificate::DualStationarity(z) => 2.0 * lipschitz * z,
    }
}

fn certified_residual(sol: &SubproblemSolution) -> f64 {
    match sol.certificate {
        Certificate::DualStationarity(z) => z,
        _ => sol.zeta.norm(),
    }
}

/// Exact prox-linear method `x_{k+1} = S_t(x_k)`.
///
/// Each step must satisfy `F(x_k) − F(x_{k+1}) ≥ (t/2)‖G_t(x_k)‖²`.
pub fn run_prox_linear(problem: &CompositeProblem, x0: &Vector, cfg: &ProxLinearConfig) -> Result<Trace> {
    let mut outer = OuterLoop::new(problem, x0, cfg)?;
    let t = outer.t;
    let mut warm: Option<Vector> = None;
    for _ in 0..cfg.max_outer {
        let report = {
            let model = outer.model()?;
            let sol = solve_exact(&model, warm.as_ref())?;
            let g_norm = (&outer.x - &sol.x).norm() / t;
            StepReport {
                x_next: sol.x,
                surrogate: g_norm,
                eps: 0.0,
                inner_iters: sol.inner_iters,
                dual: Some(sol.dual),
            }
        };
        warm = report.dual.clone();
        let g = report.surrogate;
        if outer.advance(report, Some(g), |_| 0.5 * t * g * g)? {
            return Ok(outer.finish(true));
        }
    }
    Ok(outer.finish(false))
}

/// Inexact method whose steps are `ε_{k+1}`-minimizers of `F_t(·; x_k)`.
///
/// Reports the surrogate `√(4·gap/t + 2‖(x_{k+1} − x_k)/t‖²) ≥ ‖G_t(x_k)‖`,
/// or the exact step norm when `ε_{k+1} = 0`.
pub fn run_inexact_function_gap(problem: &CompositeProblem, x0: &Vector, cfg: &ProxLinearConfig) -> Result<Trace> {
    let mut outer = OuterLoop::new(problem, x0, cfg)?;
    let t = outer.t;
    let lip = problem.lipschitz();
    let mut warm: Option<Vector> = None;
    for k in 0..cfg.max_outer {
        let eps = cfg.schedule.eps(k + 1);
        let prox_grad_true = outer.true_norm()?;
        let (report, gap) = {
            let model = outer.model()?;
            let sol = if eps == 0.0 {
                solve_exact(&model, warm.as_ref())?
            } else {
                match cfg.inner {
                    InnerSolver::Exact => solve_exact(&model, warm.as_ref())?,
                    InnerSolver::DualAccelerated => solve_to_gap(&model, eps, warm.as_ref(), cfg.max_inner)?,
                    InnerSolver::FgmDual => solve_residual(
                        &model,
                        InnerSolver::FgmDual,
                        eps / (2.0 * lip.max(f64::MIN_POSITIVE)),
                        warm.as_ref(),
                        cfg.max_inner,
                    )?,
                    InnerSolver::FgmPrimal => return Err(Error::CertificateMissing { target: eps }),
                }
            };
            let gap = certified_gap(&sol, lip);
            if eps > 0.0 && gap > eps {
                return Err(Error::CertificateMissing { target: eps });
            }
            let step = (&outer.x - &sol.x).norm() / t;
            let surrogate = if eps == 0.0 { step } else { (4.0 * gap / t + 2.0 * step * step).sqrt() };
            let report =
                StepReport { x_next: sol.x, surrogate, eps, inner_iters: sol.inner_iters, dual: Some(sol.dual) };
            (report, gap)
        };
        warm = report.dual.clone();
        let step = (&report.x_next - &outer.x).norm();
        let exact_drop = if eps == 0.0 { 0.5 * step * step / t } else { -gap };
        if outer.advance(report, prox_grad_true, |_| exact_drop)? {
            return Ok(outer.finish(true));
        }
    }
    Ok(outer.finish(false))
}

/// Inexact method whose steps exactly minimize the model perturbed by some
/// `ζ_{k+1}` with `‖ζ_{k+1}‖ ≤ ε_{k+1}`, obtained from a dual near-stationary
/// point.
///
/// Each step must satisfy `F(x_{k+1}) ≤ F(x_k) + 2L‖ζ‖ − ‖x_{k+1} − x_k‖²/(2t)`;
/// the reported surrogate is `√(8L‖ζ‖/t + 2‖(x_{k+1} − x_k)/t‖²)`.
pub fn run_inexact_dual_stationary(problem: &CompositeProblem, x0: &Vector, cfg: &ProxLinearConfig) -> Result<Trace> {
    let mut outer = OuterLoop::new(problem, x0, cfg)?;
    let t = outer.t;
    let lip = problem.lipschitz();
    let mut warm: Option<Vector> = None;
    for k in 0..cfg.max_outer {
        let eps = cfg.schedule.eps(k + 1);
        let prox_grad_true = outer.true_norm()?;
        let (report, zeta) = {
            let model = outer.model()?;
            let sol = if eps == 0.0 {
                solve_exact(&model, warm.as_ref())?
            } else {
                solve_residual(&model, cfg.inner, eps, warm.as_ref(), cfg.max_inner)?
            };
            let zeta = if eps == 0.0 { 0.0 } else { certified_residual(&sol) };
            let step = (&outer.x - &sol.x).norm() / t;
            let surrogate = if eps == 0.0 { step } else { (8.0 * lip * zeta / t + 2.0 * step * step).sqrt() };
            let report =
                StepReport { x_next: sol.x, surrogate, eps, inner_iters: sol.inner_iters, dual: Some(sol.dual) };
            (report, zeta)
        };
        warm = report.dual.clone();
        let step = (&report.x_next - &outer.x).norm();
        let drop = step * step / (2.0 * t) - 2.0 * lip * zeta;
        if outer.advance(report, prox_grad_true, |_| drop)? {
            return Ok(outer.finish(true));
        }
    }
    Ok(outer.finish(false))
}

/// Constants `(γ, τ)` of a linear rate `γ(1 − τ)^i·r₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateConstants {
    pub gamma: f64,
    pub tau: f64,
}

impl RateConstants {
    pub fn new(gamma: f64, tau: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite() && tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidRateConstants { gamma, tau });
        }
        Ok(Self { gamma, tau })
    }
}

/// Inner method with `E[F_t(z_i; x) − min F_t(·; x)] ≤ γ(1 − τ)^i‖z₀ − z⋆‖²`.
pub trait LinearlyConvergentSubscheme {
    fn rate_constants(&self, model: &LinearizedModel<'_>) -> Result<RateConstants>;
    /// Runs `n_iters` iterations from `z0`; `outer` indexes the outer step
    /// for seeding.
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, outer: usize) -> Result<Vector>;
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Inner method with `E[f(z_i) − f⋆] ≤ γ(1 − τ)^i (f(z₀) − f⋆)`.
pub trait FunctionalRateSubscheme {
    fn rate_constants(&self, model: &LinearizedModel<'_>) -> Result<RateConstants>;
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, outer: usize) -> Result<Vector>;
    fn is_deterministic(&self) -> bool {
        true
    }
}

/// `T = max(1, ⌈log(4tγ)/τ⌉)`.
pub fn coupled_inner_iterations(t: f64, rate: RateConstants) -> usize {
    let raw = ((4.0 * t * rate.gamma).ln() / rate.tau).ceil();
    if raw.is_finite() && raw >= 1.0 {
        raw as usize
    } else {
        1
    }
}

/// The model `F_t(·; y)` as `f + p` with
/// `f(z) = (1/α)h(ζ + c(y) + α∇c(y)(z − v))` and `p = g + ‖· − v‖²/(2t)`.
/// Requires a smooth `h`.
#[derive(Clone, Copy, Debug)]
pub struct PrimalModel<'m, 'a> {
    model: &'m LinearizedModel<'a>,
    grad_lipschitz: f64,
}

impl<'m, 'a> PrimalModel<'m, 'a> {
    pub fn new(model: &'m LinearizedModel<'a>) -> Result<Self> {
        let h = model.oracle().problem().h();
        let lh = h
            .grad_lipschitz()
            .ok_or_else(|| Error::InvalidParameter("primal subsolves need a smooth outer function".into()))?;
        let grad_lipschitz = model.alpha() * model.opnorm().powi(2) * lh;
        Ok(Self { model, grad_lipschitz })
    }

    pub fn model(&self) -> &'m LinearizedModel<'a> {
        self.model
    }

    /// One prox-gradient step with step `1/L_f`.
    pub fn prox_gradient_step(&self, z: &Vector) -> Result<Vector> {
        let g = self.smooth_gradient(z)?;
        self.simple_prox(1.0 / self.grad_lipschitz, &(z - g / self.grad_lipschitz))
    }
}

impl AdditiveComposite for PrimalModel<'_, '_> {
    fn dim(&self) -> usize {
        self.model.center().len()
    }
    fn smooth_value(&self, z: &Vector) -> Result<f64> {
        Ok(self.model.oracle().h_value(&self.model.affine(z)?)? / self.model.alpha())
    }
    fn smooth_gradient(&self, z: &Vector) -> Result<Vector> {
        let u = self.model.affine(z)?;
        let h = self.model.oracle().problem().h();
        let gh = h.gradient(&u).ok_or_else(|| Error::InvalidParameter("outer function has no gradient".into()))?;
        self.model.oracle().vjp(self.model.linearization_point(), &gh)
    }
    fn smooth_lipschitz(&self) -> f64 {
        self.grad_lipschitz
    }
    fn simple_value(&self, z: &Vector) -> Result<f64> {
        let gz = self.model.oracle().g_value(z)?;
        Ok(gz + (z - self.model.center()).norm_squared() / (2.0 * self.model.step()))
    }
    fn simple_prox(&self, s: f64, x: &Vector) -> Result<Vector> {
        if s == 0.0 {
            return Ok(x.clone());
        }
        let w = 1.0 / self.model.step();
        let scale = 1.0 + s * w;
        let shifted = (x + self.model.center() * (s * w)) / scale;
        self.model.oracle().prox_g(s / scale, &shifted)
    }
    fn strong_convexity(&self) -> f64 {
        1.0 / self.model.step() + self.model.oracle().problem().g().strong_convexity()
    }
}

/// The fast gradient method on the primal model with `γ = L_f/4`,
/// `τ = √(α/(2L_f))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct FgmSubscheme;

impl LinearlyConvergentSubscheme for FgmSubscheme {
    fn rate_constants(&self, model: &LinearizedModel<'_>) -> Result<RateConstants> {
        let pm = PrimalModel::new(model)?;
        let l_f = pm.smooth_lipschitz();
        RateConstants::new(l_f / 4.0, (pm.strong_convexity() / (2.0 * l_f)).sqrt())
    }
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, _outer: usize) -> Result<Vector> {
        let pm = PrimalModel::new(model)?;
        Ok(fgm_run(&pm, z0, StoppingRule::Iterations(n_iters))?.x)
    }
}

/// Proximal gradient with step `1/L_f`: `γ = 1`, `τ = α/L_f` in function gap.
#[derive(Clone, Copy, Debug, Default)]
pub struct ProxGradientScheme;

impl FunctionalRateSubscheme for ProxGradientScheme {
    fn rate_constants(&self, model: &LinearizedModel<'_>) -> Result<RateConstants> {
        let pm = PrimalModel::new(model)?;
        RateConstants::new(1.0, pm.strong_convexity() / pm.smooth_lipschitz())
    }
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, _outer: usize) -> Result<Vector> {
        let pm = PrimalModel::new(model)?;
        let mut z = z0.clone();
        for _ in 0..n_iters {
            z = pm.prox_gradient_step(&z)?;
        }
        Ok(z)
    }
}

/// `(γL_f/2, τ)`: the distance-based constants after one leading prox-gradient step.
pub fn plus_constants(rate: RateConstants, l_f: f64) -> Result<RateConstants> {
    RateConstants::new(rate.gamma * l_f / 2.0, rate.tau)
}

/// A functional-rate method preceded by one prox-gradient step.
#[derive(Clone, Copy, Debug)]
pub struct Plus<S>(pub S);

pub fn wrap_plus<S: FunctionalRateSubscheme>(inner: S) -> Plus<S> {
    Plus(inner)
}

impl<S: FunctionalRateSubscheme> LinearlyConvergentSubscheme for Plus<S> {
    fn rate_constants(&self, model: &LinearizedModel<'_>) -> Result<RateConstants> {
        let l_f = PrimalModel::new(model)?.smooth_lipschitz();
        plus_constants(self.0.rate_constants(model)?, l_f)
    }
    fn run(&self, model: &LinearizedModel<'_>, z0: &Vector, n_iters: usize, outer: usize) -> Result<Vector> {
        let start = PrimalModel::new(model)?.prox_gradient_step(z0)?;
        self.0.run(model, &start, n_iters, outer)
    }
    fn is_deterministic(&self) -> bool {
        self.0.is_deterministic()
    }
}

/// `1/(1 − 1/√2)`: with `F_t(x⁺) − min ≤ ‖x − x⋆‖²/(4t)`, `‖x − x⋆‖` is at
/// most this multiple of `‖x⁺ − x‖`.
pub const COUPLED_SURROGATE_FACTOR: f64 = 2.0 + std::f64::consts::SQRT_2;

/// Coupled scheme: `T_k = max(1, ⌈log(4tγ_k)/τ_k⌉)` inner iterations per
/// outer step, warm-started at `x_k`.
///
/// Deterministic subschemes must not increase `F`; the reported surrogate is
/// `(2 + √2)‖x_{k+1} − x_k‖/t`.
pub fn run_coupled(
    problem: &CompositeProblem,
    x0: &Vector,
    cfg: &ProxLinearConfig,
    subscheme: &dyn LinearlyConvergentSubscheme,
) -> Result<Trace> {
    let mut outer = OuterLoop::new(problem, x0, cfg)?;
    let t = outer.t;
    let deterministic = subscheme.is_deterministic();
    for k in 0..cfg.max_outer {
        let prox_grad_true = outer.true_norm()?;
        let report = {
            let model = outer.model()?;
            let rate = subscheme.rate_constants(&model)?;
            let n = coupled_inner_iterations(t, rate);
            let x_next = subscheme.run(&model, &outer.x, n, k)?;
            let surrogate = COUPLED_SURROGATE_FACTOR * (&x_next - &outer.x).norm() / t;
            StepReport { x_next, surrogate, eps: 0.0, inner_iters: n, dual: None }
        };
        let required = if deterministic { 0.0 } else { f64::NEG_INFINITY };
        if outer.advance(report, prox_grad_true, |_| required)? {
            return Ok(outer.finish(true));
        }
    }
    Ok(outer.finish(false))
}

/// One `N`-indexed rate bound: `lhs ≤ rhs` is expected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundCheck {
    pub fn holds(&self, slack: f64) -> bool {
        self.lhs <= self.rhs + slack
    }
}

fn true_norms(trace: &Trace) -> Result<Vec<f64>> {
    trace.records.iter().map(|r| r.prox_grad_true.ok_or(Error::CertificateMissing { target: 0.0 })).collect()
}

/// `F(x_n)` for `n = 0..=N`.
fn values(trace: &Trace) -> Vec<f64> {
    let mut v: Vec<f64> = trace.records.iter().map(|r| r.f_val).collect();
    v.push(trace.final_value);
    v
}

/// For every `N`: `min_{j<N} ‖G_t(x_j)‖² ≤ c·(F(x₀) − F(x_N) + e·Σ_{j≤N} ε_j)/(tN)`.
fn rate_checks(trace: &Trace, c: f64, e: f64, schedule: Option<&ErrorSchedule>) -> Result<Vec<BoundCheck>> {
    let g = true_norms(trace)?;
    let f = values(trace);
    let t = trace.step;
    let mut best = f64::INFINITY;
    let mut sum_eps = 0.0;
    let mut out = Vec::with_capacity(g.len());
    for n in 1..=g.len() {
        best = best.min(g[n - 1] * g[n - 1]);
        sum_eps += match schedule {
            Some(s) => s.eps(n),
            None => trace.records[n - 1].eps_k,
        };
        let rhs = c * (f[0] - f[n] + e * sum_eps) / (t * n as f64);
        out.push(BoundCheck { n, lhs: best, rhs });
    }
    Ok(out)
}

/// Exact method: `min_{j<N} ‖G_t(x_j)‖² ≤ 2(F(x₀) − F(x_N))/(tN)`.
pub fn exact_rate_checks(trace: &Trace) -> Result<Vec<BoundCheck>> {
    rate_checks(trace, 2.0, 0.0, None)
}

/// Gap-certified steps: `min ‖G_t‖² ≤ 2(F(x₀) − F(x_N) + Σε_j)/(tN)`.
pub fn function_gap_rate_checks(trace: &Trace) -> Result<Vec<BoundCheck>> {
    rate_checks(trace, 2.0, 1.0, None)
}

/// Stationarity-certified steps: `min ‖G_t‖² ≤ 4(F(x₀) − F(x_N) + 4LΣε_j)/(tN)`.
pub fn dual_stationary_rate_checks(trace: &Trace, lipschitz: f64) -> Result<Vec<BoundCheck>> {
    rate_checks(trace, 4.0, 4.0 * lipschitz, None)
}

/// Coupled scheme: `min ‖G_t‖² ≤ 4(F(x₀) − F(x_N))/(tN)`.
pub fn coupled_rate_checks(trace: &Trace) -> Result<Vec<BoundCheck>> {
    rate_checks(trace, 4.0, 0.0, None)
}

#[cfg(test)]
mod tests;
