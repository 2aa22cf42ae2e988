//! Maps a solver table onto a library driver and returns its trace.

use proxlin::accelerated::{
    run_accelerated, run_accelerated_backtracking, run_accelerated_inexact_gap, run_accelerated_inexact_stationary,
    AccelConfig, BacktrackConfig, WeightRule,
};
use proxlin::finite_sum::{phase_retrieval_sum, run_finite_sum_driver, FiniteSumMode, FiniteSumOptions, GradientBound};
use proxlin::oracle::objective_value;
use proxlin::problems::{InstanceSpec, ProblemInstance};
use proxlin::prox_linear::{
    run_inexact_dual_stationary, run_inexact_function_gap, run_prox_linear, InnerSolver, ProxLinearConfig,
};
use proxlin::smoothing::{
    run_budgeted_driver, run_smoothed_driver, BudgetPlan, SmoothedInner, SmoothedOptions, SmoothingPlan,
};
use proxlin::trace::Trace;

use crate::config::{
    FiniteSumModeConfig, GradientBoundConfig, InnerConfig, SmoothedInnerConfig, SolverSpec, WeightsConfig,
};
use crate::error::CliError;

fn inner_solver(inner: InnerConfig) -> InnerSolver {
    match inner {
        InnerConfig::Exact => InnerSolver::Exact,
        InnerConfig::DualAccelerated => InnerSolver::DualAccelerated,
        InnerConfig::FgmDual => InnerSolver::FgmDual,
        InnerConfig::FgmPrimal => InnerSolver::FgmPrimal,
    }
}

fn default_mu_tilde(mu: f64) -> f64 {
    if mu > 0.0 {
        2.0 * mu
    } else {
        1.0
    }
}

pub fn run_solver(inst: &ProblemInstance, spec: &SolverSpec, seed: u64, timing: bool) -> Result<Trace, CliError> {
    let p = &inst.problem;
    let x0 = &inst.start;
    let mu = p.mu();
    let err = CliError::from_solver;
    let outer = |t: Option<f64>, max_outer: usize, tol: f64, record_true: bool| ProxLinearConfig {
        t,
        max_outer,
        tol,
        record_true,
        timing,
        ..ProxLinearConfig::default()
    };
    let trace = match *spec {
        SolverSpec::ProxLinear { t, max_outer, tol, record_true } => {
            run_prox_linear(p, x0, &outer(t, max_outer, tol, record_true)).map_err(err)?
        }
        SolverSpec::InexactGap { t, max_outer, tol, schedule, inner, record_true } => {
            let cfg = ProxLinearConfig {
                schedule: schedule.schedule(),
                inner: inner_solver(inner),
                ..outer(t, max_outer, tol, record_true)
            };
            run_inexact_function_gap(p, x0, &cfg).map_err(err)?
        }
        SolverSpec::InexactStationary { t, max_outer, tol, schedule, inner, record_true } => {
            let cfg = ProxLinearConfig {
                schedule: schedule.schedule(),
                inner: inner_solver(inner),
                ..outer(t, max_outer, tol, record_true)
            };
            run_inexact_dual_stationary(p, x0, &cfg).map_err(err)?
        }
        SolverSpec::Smoothed { eps, inner, max_outer } => {
            let plan = SmoothingPlan::new(p, eps).map_err(err)?;
            let inner = match inner {
                SmoothedInnerConfig::FgmDual => SmoothedInner::FgmDual,
                SmoothedInnerConfig::FgmPrimal => SmoothedInner::FgmPrimal,
            };
            let opts = SmoothedOptions { max_outer, record_comparisons: false, timing };
            run_smoothed_driver(p, x0, &plan, inner, &opts).map_err(err)?.trace
        }
        SolverSpec::Budgeted { total, q } => {
            let q = match q {
                Some(q) => q,
                None => {
                    let f0 = objective_value(p, x0).map_err(err)?;
                    inst.reference.as_ref().map_or(f0, |r| f0 - r.inf_value)
                }
            };
            let plan = BudgetPlan::for_problem(p, total, q).map_err(err)?;
            run_budgeted_driver(p, x0, &plan, false).map_err(err)?.1
        }
        SolverSpec::Accelerated { mu_tilde, n_steps, weights } => {
            let cfg = AccelConfig {
                weights: match weights {
                    WeightsConfig::Standard => WeightRule::Standard,
                    WeightsConfig::Fista => WeightRule::Fista,
                },
                timing,
                ..AccelConfig::new(mu_tilde.unwrap_or_else(|| default_mu_tilde(mu)), n_steps)
            };
            run_accelerated(p, x0, x0, &cfg).map_err(err)?.to_trace()
        }
        SolverSpec::AcceleratedInexactGap { mu_tilde, n_steps, eps, delta } => {
            let cfg =
                AccelConfig { timing, ..AccelConfig::new(mu_tilde.unwrap_or_else(|| default_mu_tilde(mu)), n_steps) };
            run_accelerated_inexact_gap(p, x0, x0, &cfg, eps.schedule(), delta.schedule()).map_err(err)?.to_trace()
        }
        SolverSpec::AcceleratedInexactStationary { mu_tilde, n_steps, eps, delta } => {
            let cfg =
                AccelConfig { timing, ..AccelConfig::new(mu_tilde.unwrap_or_else(|| default_mu_tilde(mu)), n_steps) };
            run_accelerated_inexact_stationary(p, x0, x0, &cfg, eps.schedule(), delta.schedule())
                .map_err(err)?
                .to_trace()
        }
        SolverSpec::Backtracking { t0, eta, alpha, n_steps } => {
            let t0 = t0.unwrap_or(if mu > 0.0 { 1.0 / mu } else { 1.0 });
            let cfg = BacktrackConfig { t0, eta, alpha, n_steps, timing };
            run_accelerated_backtracking(p, x0, x0, &cfg).map_err(err)?.to_trace()
        }
        SolverSpec::FiniteSum { eps, mode, max_outer, bound } => {
            let InstanceSpec::PhaseRetrieval { d, m } = inst.spec else {
                return Err(CliError::Usage("the finite_sum method needs a phase_retrieval instance".into()));
            };
            let (fs, _) = phase_retrieval_sum(d, m, inst.seed).map_err(err)?;
            let opts = FiniteSumOptions {
                max_outer,
                seed,
                bound: match bound {
                    GradientBoundConfig::Global => GradientBound::Global,
                    GradientBoundConfig::PerPoint => GradientBound::PerPoint,
                },
                record_true: false,
            };
            let mode = match mode {
                FiniteSumModeConfig::Smooth => FiniteSumMode::Smooth,
                FiniteSumModeConfig::Smoothed => FiniteSumMode::Smoothed,
            };
            run_finite_sum_driver(&fs, x0, eps, mode, &opts).map_err(err)?.trace
        }
    };
    Ok(trace)
}
