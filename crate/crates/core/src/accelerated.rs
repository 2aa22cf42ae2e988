//! Inertial prox-linear method with the two-center mapping
//! `S_{t,α}(y, v) = argmin_z g(z) + (1/α)h(c(y) + α∇c(y)(z − v)) + ‖z − v‖²/(2t)`,
//! its inexact variants and the backtracking variant.
//!
//! Step `k ≥ 1`: `y_k = a_k v_{k−1} + (1 − a_k)x_{k−1}`, `x_k = S_{1/μ̃}(y_k)`,
//! `v_k = S_{1/(μ̃a_k), a_k}(y_k, v_{k−1})`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::oracle::{Oracle, OracleCounters};
use crate::problem::CompositeProblem;
use crate::prox_linear::{descent_slack, ErrorSchedule};
use crate::subproblem::{
    prox_gradient, solve_exact, solve_to_gap, solve_to_residual, Certificate, LinearizedModel, SubproblemSolution,
    DEFAULT_MAX_DUAL_ITERS,
};
use crate::trace::{IterateRecord, StopReason, Trace};

/// Interpolation weights `a_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WeightRule {
    /// `a_k = 2/(k + 1)`.
    #[default]
    Standard,
    /// `a_1 = 1`, `(1 − a_k)/a_k² = 1/a_{k−1}²`.
    Fista,
}

impl WeightRule {
    /// `a_1, …, a_n`.
    pub fn weights(self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for k in 1..=n {
            let a = match (self, out.last()) {
                (WeightRule::Standard, _) | (WeightRule::Fista, None) => 2.0 / (k as f64 + 1.0),
                (WeightRule::Fista, Some(&prev)) => {
                    let p2: f64 = prev * prev;
                    0.5 * ((p2 * p2 + 4.0 * p2).sqrt() - p2)
                }
            };
            out.push(a);
        }
        out
    }
}

/// Minimizer of the two-center model to functional gap `tol`.
pub fn solve_two_center(model: &LinearizedModel<'_>, tol: f64, max_iters: usize) -> Result<SubproblemSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("two-center tolerance {tol}")));
    }
    solve_to_gap(model, tol, None, max_iters).map_err(|e| match e {
        Error::DualBudgetExhausted { iters, target, reached } => Error::BudgetExhausted { iters, target, reached },
        other => other,
    })
}

/// `F_α(z; y, v)`: the two-center model without its proximal term.
pub fn weighted_model_value(model: &LinearizedModel<'_>, z: &Vector) -> Result<f64> {
    Ok(model.value(z)? - (z - model.center()).norm_squared() / (2.0 * model.step()))
}

/// `F_α(w) + (‖w − v‖² − ‖w − z‖² − ‖z − v‖²)/(2t) − F_α(z)`; nonnegative
/// when `z` minimizes the model.
pub fn three_point_slack(model: &LinearizedModel<'_>, z: &Vector, w: &Vector) -> Result<f64> {
    let v = model.center();
    let t = model.step();
    let quad = ((w - v).norm_squared() - (w - z).norm_squared() - (z - v).norm_squared()) / (2.0 * t);
    Ok(weighted_model_value(model, w)? + quad - weighted_model_value(model, z)?)
}

/// Convexity metadata of an instance: weak convexity `ρ` of `h∘c`,
/// convexity constant `r` of the pair and the domain diameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexityMeta {
    pub rho: f64,
    pub r: f64,
    pub diameter: Option<f64>,
}

impl ConvexityMeta {
    pub fn convex() -> Self {
        Self { rho: 0.0, r: 0.0, diameter: None }
    }

    /// `M²(r + (ρ/2)(N + 3))`, zero when `r = 0`.
    fn curvature_term(&self, n: usize) -> f64 {
        if self.r == 0.0 {
            return 0.0;
        }
        match self.diameter {
            Some(m) => m * m * (self.r + 0.5 * self.rho * (n as f64 + 3.0)),
            None => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccelConfig {
    pub mu_tilde: f64,
    pub n_steps: usize,
    pub weights: WeightRule,
    pub max_inner: usize,
    pub timing: bool,
}

impl AccelConfig {
    pub fn new(mu_tilde: f64, n_steps: usize) -> Self {
        Self { mu_tilde, n_steps, weights: WeightRule::Standard, max_inner: DEFAULT_MAX_DUAL_ITERS, timing: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BacktrackConfig {
    pub t0: f64,
    pub eta: f64,
    pub alpha: f64,
    pub n_steps: usize,
    pub timing: bool,
}

/// Which scheme produced a run.
#[derive(Clone, Debug, PartialEq)]
pub enum AccelVariant {
    Exact,
    InexactStationary { eps: ErrorSchedule, delta: ErrorSchedule },
    InexactGap { eps: ErrorSchedule, delta: ErrorSchedule },
    Backtracking { t0: f64, eta: f64, alpha: f64 },
}

/// Step `k` of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct AccelStep {
    pub k: usize,
    pub a: f64,
    pub y: Vector,
    pub x: Vector,
    pub v: Vector,
    /// `F(x_k)`.
    pub f_x: f64,
    /// `‖G_{1/μ̃_k}(y_k)‖`.
    pub grad_norm_y: f64,
    pub mu_tilde: f64,
    /// Evaluations of `S_{αt}(y_k)` in the line search; 1 without backtracking.
    pub trials: usize,
    /// `1 + ⌈log(t_{k−1}μ)/log(1/η)⌉`, at least 1.
    pub trial_cap: usize,
    pub eps: f64,
    pub delta: f64,
    /// Attained certificate values for the `x` and `v` solves.
    pub eps_attained: f64,
    pub delta_attained: f64,
    pub inner_iters: usize,
    pub counters: OracleCounters,
    pub wall_ns: u64,
}

#[derive(Clone, Debug)]
pub struct AccelRun {
    pub variant: AccelVariant,
    pub weights: WeightRule,
    pub mu: f64,
    pub lipschitz: f64,
    pub x0: Vector,
    pub v0: Vector,
    pub f0: f64,
    pub steps: Vec<AccelStep>,
    pub counters: OracleCounters,
}

/// One post-hoc bound evaluation at horizon `n`.
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

fn check_mu_tilde(problem: &CompositeProblem, mu_tilde: f64) -> Result<()> {
    let mu = problem.mu();
    if !(mu_tilde > mu && mu_tilde.is_finite()) {
        return Err(Error::InvalidMuTilde { mu_tilde, mu });
    }
    Ok(())
}

fn check_start(oracle: &Oracle<'_>, x0: &Vector, v0: &Vector) -> Result<f64> {
    if oracle.g_value(v0)? == f64::INFINITY {
        return Err(Error::InvalidParameter("v0 outside dom g".into()));
    }
    let f0 = oracle.objective(x0)?;
    if f0 == f64::INFINITY {
        return Err(Error::InvalidParameter("x0 outside dom g".into()));
    }
    Ok(f0)
}

fn attained(sol: &SubproblemSolution) -> f64 {
    match sol.certificate {
        Certificate::ClosedForm => 0.0,
        Certificate::FunctionGap(g) => g,
        Certificate::DualStationarity(z) => z,
    }
}

/// How the two subproblems of a step are solved.
#[derive(Clone, Copy)]
enum Inner {
    Exact,
    Residual(f64, f64),
    Gap(f64, f64),
}

struct Solves {
    x: SubproblemSolution,
    v: SubproblemSolution,
}

#[allow(clippy::too_many_arguments)]
fn solve_pair(
    oracle: &Oracle<'_>,
    y: &Vector,
    v_prev: &Vector,
    mu_tilde: f64,
    a: f64,
    inner: Inner,
    warm: &mut (Option<Vector>, Option<Vector>),
    max_inner: usize,
) -> Result<Solves> {
    let xm = LinearizedModel::new(oracle, y, 1.0 / mu_tilde)?;
    let vm = LinearizedModel::two_center(oracle, y, v_prev, 1.0 / (mu_tilde * a), a)?;
    let solve = |model: &LinearizedModel<'_>, tol: Option<f64>, gap: bool, w: Option<&Vector>| match tol {
        Some(tol) if tol > 0.0 => {
            if gap {
                solve_to_gap(model, tol, w, max_inner).map_err(|e| match e {
                    Error::DualBudgetExhausted { target, .. } => Error::CertificateMissing { target },
                    other => other,
                })
            } else {
                solve_to_residual(model, tol, w, max_inner)
            }
        }
        _ => solve_exact(model, w),
    };
    let (xs, vs) = match inner {
        Inner::Exact => (solve(&xm, None, false, warm.0.as_ref())?, solve(&vm, None, false, warm.1.as_ref())?),
        Inner::Residual(e, d) => {
            (solve(&xm, Some(e), false, warm.0.as_ref())?, solve(&vm, Some(d), false, warm.1.as_ref())?)
        }
        Inner::Gap(e, d) => (solve(&xm, Some(e), true, warm.0.as_ref())?, solve(&vm, Some(d), true, warm.1.as_ref())?),
    };
    *warm = (Some(xs.dual.clone()), Some(vs.dual.clone()));
    Ok(Solves { x: xs, v: vs })
}

fn run_fixed(
    problem: &CompositeProblem,
    x0: &Vector,
    v0: &Vector,
    cfg: &AccelConfig,
    variant: AccelVariant,
) -> Result<AccelRun> {
    check_mu_tilde(problem, cfg.mu_tilde)?;
    let oracle = Oracle::new(problem);
    let audit = Oracle::new(problem);
    let f0 = check_start(&audit, x0, v0)?;
    let mu_tilde = cfg.mu_tilde;
    let start = Instant::now();
    let weights = cfg.weights.weights(cfg.n_steps);
    let (mut x, mut v) = (x0.clone(), v0.clone());
    let mut warm = (None, None);
    let mut steps = Vec::with_capacity(cfg.n_steps);
    for (i, &a) in weights.iter().enumerate() {
        let k = i + 1;
        let (eps, delta, inner) = match &variant {
            AccelVariant::InexactStationary { eps, delta } => {
                let (e, d) = (eps.eps(k), delta.eps(k));
                (e, d, Inner::Residual(e, d))
            }
            AccelVariant::InexactGap { eps, delta } => {
                let (e, d) = (eps.eps(k), delta.eps(k));
                (e, d, Inner::Gap(e, d))
            }
            _ => (0.0, 0.0, Inner::Exact),
        };
        let y = &v * a + &x * (1.0 - a);
        let s = solve_pair(&oracle, &y, &v, mu_tilde, a, inner, &mut warm, cfg.max_inner)?;
        let grad_norm_y = match inner {
            Inner::Exact => (&y - &s.x.x).norm() * mu_tilde,
            _ => prox_gradient(&audit, &y, 1.0 / mu_tilde)?.0.norm(),
        };
        x = s.x.x.clone();
        v = s.v.x.clone();
        let f_x = audit.objective(&x)?;
        steps.push(AccelStep {
            k,
            a,
            y,
            x: x.clone(),
            v: v.clone(),
            f_x,
            grad_norm_y,
            mu_tilde,
            trials: 1,
            trial_cap: 1,
            eps,
            delta,
            eps_attained: attained(&s.x),
            delta_attained: attained(&s.v),
            inner_iters: s.x.inner_iters + s.v.inner_iters,
            counters: oracle.counters(),
            wall_ns: if cfg.timing { start.elapsed().as_nanos() as u64 } else { 0 },
        });
    }
    Ok(AccelRun {
        variant,
        weights: cfg.weights,
        mu: problem.mu(),
        lipschitz: problem.lipschitz(),
        x0: x0.clone(),
        v0: v0.clone(),
        f0,
        steps,
        counters: oracle.counters(),
    })
}

/// Exact accelerated prox-linear method.
pub fn run_accelerated(problem: &CompositeProblem, x0: &Vector, v0: &Vector, cfg: &AccelConfig) -> Result<AccelRun> {
    run_fixed(problem, x0, v0, cfg, AccelVariant::Exact)
}

/// Both subproblems solved to dual stationarity: `x_k` and `v_k` exactly
/// minimize the models perturbed inside `h` by `ζ_k`, `ξ_k` with
/// `‖ζ_k‖ ≤ ε_k`, `‖ξ_k‖ ≤ δ_k`. Zero entries are solved exactly.
pub fn run_accelerated_inexact_stationary(
    problem: &CompositeProblem,
    x0: &Vector,
    v0: &Vector,
    cfg: &AccelConfig,
    eps: ErrorSchedule,
    delta: ErrorSchedule,
) -> Result<AccelRun> {
    run_fixed(problem, x0, v0, cfg, AccelVariant::InexactStationary { eps, delta })
}

/// `x_k` an `ε_k`-minimizer and `v_k` a `δ_k`-minimizer in function value.
pub fn run_accelerated_inexact_gap(
    problem: &CompositeProblem,
    x0: &Vector,
    v0: &Vector,
    cfg: &AccelConfig,
    eps: ErrorSchedule,
    delta: ErrorSchedule,
) -> Result<AccelRun> {
    run_fixed(problem, x0, v0, cfg, AccelVariant::InexactGap { eps, delta })
}

/// Trials the line search may need from step `t`: `1 + ⌈log(tμ)/log(1/η)⌉`.
pub fn backtracking_trial_cap(t: f64, mu: f64, eta: f64) -> usize {
    let r = (t * mu).ln() / (1.0 / eta).ln();
    if r.is_finite() && r > 0.0 {
        1 + r.ceil() as usize
    } else {
        1
    }
}

/// Outcome of one line search.
#[derive(Clone, Debug)]
pub struct LineSearch {
    pub mu_tilde: f64,
    pub t: f64,
    pub x: SubproblemSolution,
    pub trials: usize,
}

/// Shrinks `t ← ηt` until `F(S_{αt}(y)) ≤ F_t(S_{αt}(y); y)`.
pub fn backtrack(
    oracle: &Oracle<'_>,
    y: &Vector,
    t: f64,
    eta: f64,
    alpha: f64,
    warm: Option<&Vector>,
) -> Result<LineSearch> {
    let mut t = t;
    let mut trials = 0;
    let mut warm = warm.cloned();
    loop {
        trials += 1;
        let model = LinearizedModel::new(oracle, y, alpha * t)?;
        let sol = solve_exact(&model, warm.as_ref())?;
        let f = oracle.objective(&sol.x)?;
        let upper = weighted_model_value(&model, &sol.x)? + (&sol.x - y).norm_squared() / (2.0 * t);
        if f <= upper + descent_slack(upper) {
            return Ok(LineSearch { mu_tilde: 1.0 / (alpha * t), t, x: sol, trials });
        }
        if !(t > f64::MIN_POSITIVE) {
            return Err(Error::InvalidParameter("line search step underflow".into()));
        }
        warm = Some(sol.dual);
        t *= eta;
    }
}

/// Accelerated method with a backtracking line search on `μ̃`.
pub fn run_accelerated_backtracking(
    problem: &CompositeProblem,
    x0: &Vector,
    v0: &Vector,
    cfg: &BacktrackConfig,
) -> Result<AccelRun> {
    let BacktrackConfig { t0, eta, alpha, n_steps, timing } = *cfg;
    if !(t0 > 0.0 && t0.is_finite() && eta > 0.0 && eta < 1.0 && alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("backtracking t0={t0}, eta={eta}, alpha={alpha}")));
    }
    let oracle = Oracle::new(problem);
    let f0 = check_start(&oracle, x0, v0)?;
    let mu = problem.mu();
    let start = Instant::now();
    let (mut x, mut v, mut t) = (x0.clone(), v0.clone(), t0);
    let (mut warm_x, mut warm_v): (Option<Vector>, Option<Vector>) = (None, None);
    let mut steps = Vec::with_capacity(n_steps);
    for (i, a) in WeightRule::Standard.weights(n_steps).into_iter().enumerate() {
        let y = &v * a + &x * (1.0 - a);
        let trial_cap = backtracking_trial_cap(t, mu, eta);
        let ls = backtrack(&oracle, &y, t, eta, alpha, warm_x.as_ref())?;
        t = ls.t;
        let vm = LinearizedModel::two_center(&oracle, &y, &v, 1.0 / (ls.mu_tilde * a), a)?;
        let vs = solve_exact(&vm, warm_v.as_ref())?;
        let grad_norm_y = (&y - &ls.x.x).norm() * ls.mu_tilde;
        x = ls.x.x.clone();
        v = vs.x.clone();
        let f_x = oracle.objective(&x)?;
        steps.push(AccelStep {
            k: i + 1,
            a,
            y,
            x: x.clone(),
            v: v.clone(),
            f_x,
            grad_norm_y,
            mu_tilde: ls.mu_tilde,
            trials: ls.trials,
            trial_cap,
            eps: 0.0,
            delta: 0.0,
            eps_attained: attained(&ls.x),
            delta_attained: attained(&vs),
            inner_iters: ls.x.inner_iters + vs.inner_iters,
            counters: oracle.counters(),
            wall_ns: if timing { start.elapsed().as_nanos() as u64 } else { 0 },
        });
        warm_x = Some(ls.x.dual);
        warm_v = Some(vs.dual);
    }
    Ok(AccelRun {
        variant: AccelVariant::Backtracking { t0, eta, alpha },
        weights: WeightRule::Standard,
        mu,
        lipschitz: problem.lipschitz(),
        x0: x0.clone(),
        v0: v0.clone(),
        f0,
        steps,
        counters: oracle.counters(),
    })
}

/// `N(N + 1)(2N + 1)`.
fn cubic(n: usize) -> f64 {
    let n = n as f64;
    n * (n + 1.0) * (2.0 * n + 1.0)
}

/// `(N + 1)(2N + 1)`.
fn quadratic(n: usize) -> f64 {
    let n = n as f64;
    (n + 1.0) * (2.0 * n + 1.0)
}

/// `A_N = √(2/μ̃)·S + (‖x⋆ − v₀‖² + M²N(r + (ρ/2)(N+3))/μ̃
/// + (2/μ̃)Σ(δ_i a_i + 2ε_i)/a_i² + (2/μ̃)S²)^{1/2}` with `S = Σ√(δ_i/a_i)`.
pub fn gap_distance_bound(
    mu_tilde: f64,
    dist0_sq: f64,
    meta: &ConvexityMeta,
    eps: &[f64],
    delta: &[f64],
    a: &[f64],
) -> f64 {
    let n = a.len();
    let s: f64 = delta.iter().zip(a).map(|(d, a)| (d / a).sqrt()).sum();
    let err: f64 = (0..n).map(|i| (delta[i] * a[i] + 2.0 * eps[i]) / (a[i] * a[i])).sum();
    let inner = dist0_sq + n as f64 * meta.curvature_term(n) / mu_tilde + 2.0 / mu_tilde * err + 2.0 / mu_tilde * s * s;
    (2.0 / mu_tilde).sqrt() * s + inner.sqrt()
}

impl AccelRun {
    pub fn n_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn final_point(&self) -> &Vector {
        self.steps.last().map_or(&self.x0, |s| &s.x)
    }

    /// Whether `F(x_ref) ≤ F(x_k)` for every iterate, as the bounds require.
    pub fn reference_is_valid(&self, f_ref: f64) -> bool {
        self.steps.iter().all(|s| f_ref <= s.f_x)
    }

    /// `min_{j ≤ N} ‖G(y_j)‖²` for `N = 1, …`.
    pub fn min_sq_grad_prefix(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.steps
            .iter()
            .map(|s| {
                best = best.min(s.grad_norm_y * s.grad_norm_y);
                best
            })
            .collect()
    }

    fn schedules(&self, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let s = &self.steps[..n];
        (s.iter().map(|s| s.eps).collect(), s.iter().map(|s| s.delta).collect(), s.iter().map(|s| s.a).collect())
    }

    fn require_standard(&self) -> Result<()> {
        if self.weights != WeightRule::Standard {
            return Err(Error::InvalidParameter("bounds are stated for a_k = 2/(k+1)".into()));
        }
        Ok(())
    }

    fn fixed_mu_tilde(&self) -> f64 {
        self.steps.first().map_or(f64::NAN, |s| s.mu_tilde)
    }

    /// Largest and initial `μ̃` of the backtracking bound.
    pub fn backtracking_mu_tilde(&self) -> Option<(f64, f64)> {
        match self.variant {
            AccelVariant::Backtracking { t0, eta, alpha } => {
                Some(((1.0 / (alpha * t0)).max(self.mu / (alpha * eta)), 1.0 / (alpha * t0)))
            }
            _ => None,
        }
    }

    /// Right-hand side of the bound on `F(x_N) − F(x⋆)` in the convex case (`r = 0`).
    pub fn value_bound(&self, n: usize, dist0_sq: f64) -> Result<f64> {
        self.require_standard()?;
        let np1 = n as f64 + 1.0;
        let (eps, delta, a) = self.schedules(n);
        let mt = self.fixed_mu_tilde();
        Ok(match &self.variant {
            AccelVariant::Exact => 2.0 * mt * dist0_sq / (np1 * np1),
            AccelVariant::InexactStationary { .. } => {
                let err: f64 = (0..n).map(|i| (eps[i] + delta[i]) / (a[i] * a[i])).sum();
                (2.0 * mt * dist0_sq + 8.0 * self.lipschitz * err) / (np1 * np1)
            }
            AccelVariant::InexactGap { .. } => {
                let a_n = gap_distance_bound(mt, dist0_sq, &ConvexityMeta::convex(), &eps, &delta, &a);
                let err: f64 = (0..n).map(|i| (delta[i] * a[i] + 2.0 * eps[i]) / (a[i] * a[i])).sum();
                let s: f64 = delta.iter().zip(&a).map(|(d, a)| (d / a).sqrt()).sum();
                (2.0 * mt * dist0_sq + 4.0 * err + 4.0 * a_n * (2.0 * mt).sqrt() * s) / (np1 * np1)
            }
            AccelVariant::Backtracking { .. } => {
                let (mmax, _) = self.backtracking_mu_tilde().expect("backtracking run");
                2.0 * mmax * dist0_sq / (np1 * np1)
            }
        })
    }

    /// Right-hand side of the bound on `min_{j ≤ N} ‖G(y_j)‖²`.
    ///
    /// The near-stationarity variant uses `μ̃‖x⋆ − v₀‖²` in its leading term,
    /// which is what its telescoped inequality yields.
    pub fn stationarity_bound(&self, n: usize, dist0_sq: f64, meta: &ConvexityMeta) -> Result<f64> {
        self.require_standard()?;
        if n == 0 {
            return Ok(f64::INFINITY);
        }
        let (eps, delta, a) = self.schedules(n);
        let mt = self.fixed_mu_tilde();
        let curv = meta.curvature_term(n) / quadratic(n);
        Ok(match &self.variant {
            AccelVariant::Exact => 24.0 * mt * mt / (mt - self.mu) * (mt * dist0_sq / cubic(n) + curv),
            AccelVariant::InexactStationary { .. } => {
                let err: f64 = (0..n).map(|i| (2.0 * eps[i] + delta[i]) / (a[i] * a[i])).sum();
                48.0 * mt * mt / (mt - self.mu)
                    * (mt * dist0_sq / cubic(n) + curv + 4.0 * self.lipschitz * err / cubic(n))
            }
            AccelVariant::InexactGap { .. } => {
                let a_n = gap_distance_bound(mt, dist0_sq, meta, &eps, &delta, &a);
                let err: f64 = (0..n).map(|i| (delta[i] * a[i] + 3.0 * eps[i]) / (a[i] * a[i])).sum();
                let s: f64 = delta.iter().zip(&a).map(|(d, a)| (d / a).sqrt()).sum();
                96.0 * mt * mt / (mt - self.mu)
                    * (mt * dist0_sq / (2.0 * cubic(n)) + 0.5 * curv + (err + a_n * (2.0 * mt).sqrt() * s) / cubic(n))
            }
            AccelVariant::Backtracking { alpha, .. } => {
                let (mmax, m0) = self.backtracking_mu_tilde().expect("backtracking run");
                24.0 * mmax / (1.0 - alpha) * (m0 * dist0_sq / cubic(n) + curv)
            }
        })
    }

    /// `F(x_N) − F(x⋆)` against the value bound for every `N`; `None` if
    /// `x⋆` is not below all iterates.
    pub fn value_checks(&self, x_star: &Vector, f_star: f64) -> Result<Option<Vec<BoundCheck>>> {
        if !self.reference_is_valid(f_star) {
            return Ok(None);
        }
        let d0 = (x_star - &self.v0).norm_squared();
        let mut out = Vec::with_capacity(self.steps.len());
        for (i, s) in self.steps.iter().enumerate() {
            out.push(BoundCheck { n: i + 1, lhs: s.f_x - f_star, rhs: self.value_bound(i + 1, d0)? });
        }
        Ok(Some(out))
    }

    /// `min_{j ≤ N} ‖G(y_j)‖²` against the stationarity bound for every `N`.
    pub fn stationarity_checks(
        &self,
        x_star: &Vector,
        f_star: f64,
        meta: &ConvexityMeta,
    ) -> Result<Option<Vec<BoundCheck>>> {
        if !self.reference_is_valid(f_star) {
            return Ok(None);
        }
        let d0 = (x_star - &self.v0).norm_squared();
        let mins = self.min_sq_grad_prefix();
        let mut out = Vec::with_capacity(mins.len());
        for (i, m) in mins.into_iter().enumerate() {
            out.push(BoundCheck { n: i + 1, lhs: m, rhs: self.stationarity_bound(i + 1, d0, meta)? });
        }
        Ok(Some(out))
    }

    /// Slack of the per-step telescoping inequality at `x` for step `k`:
    /// right side minus `F(x_k)`.
    pub fn telescoping_slack(
        &self,
        problem: &CompositeProblem,
        k: usize,
        x: &Vector,
        meta: &ConvexityMeta,
    ) -> Result<f64> {
        let s = &self.steps[k - 1];
        let (x_prev, f_prev, v_prev) = if k == 1 {
            (&self.x0, self.f0, &self.v0)
        } else {
            let p = &self.steps[k - 2];
            (&p.x, p.f_x, &p.v)
        };
        let a = s.a;
        let f = Oracle::new(problem).objective(x)?;
        let mt = s.mu_tilde;
        let rhs =
            a * f + (1.0 - a) * f_prev + 0.5 * mt * a * a * ((x - v_prev).norm_squared() - (x - &s.v).norm_squared())
                - 0.5 * (mt - self.mu) * (&s.y - &s.x).norm_squared()
                + meta.rho * a * (x - x_prev).norm_squared()
                + 0.5 * meta.r * a * a * (x - v_prev).norm_squared();
        Ok(rhs - s.f_x)
    }

    /// Trace view: record `k − 1` holds `F(x_k)`, `‖G(y_k)‖` and `‖x_k − x_{k−1}‖`.
    pub fn to_trace(&self) -> Trace {
        let mut points = vec![self.x0.clone()];
        let mut records = Vec::with_capacity(self.steps.len());
        for s in &self.steps {
            let step_norm = (&s.x - points.last().expect("nonempty")).norm();
            records.push(IterateRecord {
                k: s.k,
                f_val: s.f_x,
                prox_grad_norm: s.grad_norm_y,
                prox_grad_true: Some(s.grad_norm_y),
                step_norm,
                eps_k: s.eps,
                delta_k: s.delta,
                inner_iters: s.inner_iters,
                counters: s.counters,
                wall_ns: s.wall_ns,
            });
            points.push(s.x.clone());
        }
        Trace {
            records,
            final_value: self.steps.last().map_or(self.f0, |s| s.f_x),
            points,
            step: self.steps.last().map_or(f64::NAN, |s| 1.0 / s.mu_tilde),
            stop: StopReason::MaxIters,
            counters: self.counters,
        }
    }
}

#[cfg(test)]
mod tests;
