use std::sync::Arc;

use super::*;
use crate::linalg::Matrix;
use crate::problems::{make_additive_composite, make_pathology, make_phase_retrieval};
use crate::prox::{huber, BoxIndicator, L1Norm, ProxFunction, Zero};
use crate::smooth::AffineMap;

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

/// `huber_κ(Ax − b)` with a box constraint: convex, smooth outer function.
fn smooth_affine_problem() -> CompositeProblem {
    let a = Matrix::from_row_slice(4, 3, &[1.0, 0.2, -0.5, 0.3, 1.5, 0.1, -0.7, 0.4, 1.0, 0.9, -0.2, 0.6]);
    let c = AffineMap::new(a, v(&[0.5, -1.0, 0.3, 2.0]));
    CompositeProblem::new(Arc::new(BoxIndicator::uniform(3, -2.0, 2.0)), Arc::new(huber(0.5, 4)), Arc::new(c)).unwrap()
}

#[test]
fn schedules() {
    assert_eq!(ErrorSchedule::Zero.eps(3), 0.0);
    assert!((ErrorSchedule::InverseSquare { scale: 2.0 }.eps(2) - 0.5).abs() < 1e-15);
    assert!((ErrorSchedule::PowerLaw { eps0: 1.0, q: 1.0 }.eps(3) - 1.0 / 9.0).abs() < 1e-15);
    assert!((ErrorSchedule::Constant { value: 0.5 }.partial_sum(4) - 2.0).abs() < 1e-15);
    let s = ErrorSchedule::InverseSquare { scale: 1.0 }.partial_sum(10_000);
    assert!(s < std::f64::consts::PI.powi(2) / 6.0);
}

#[test]
fn additive_composite_reproduces_prox_gradient_iterates() {
    let inst = make_additive_composite(4, 3).unwrap();
    let p = &inst.problem;
    let cfg = ProxLinearConfig { max_outer: 15, ..Default::default() };
    let trace = run_prox_linear(p, &inst.start, &cfg).unwrap();
    let t = trace.step;
    let mut x = inst.start.clone();
    for point in &trace.points[1..] {
        let grad = p.c().vjp(&x, &v(&[1.0]));
        x = p.g().prox(t, &(&x - grad * t));
        assert!((&x - point).norm() < 1e-14);
    }
}

#[test]
fn pathology_iterates_approach_the_kink() {
    let inst = make_pathology().unwrap();
    let cfg = ProxLinearConfig { max_outer: 200, ..Default::default() };
    let trace = run_prox_linear(&inst.problem, &inst.start, &cfg).unwrap();
    let xs: Vec<f64> = trace.points.iter().map(|p| p[0]).collect();
    for w in xs.windows(2) {
        assert!(w[1] <= w[0] && w[1] >= 1.0);
    }
    let last = *xs.last().unwrap();
    assert!(last - 1.0 < 1e-6);
    assert!((2.0 * last - 2.0).abs() < 1e-5);
    assert!(trace.records.last().unwrap().prox_grad_norm < 1e-5);
}

#[test]
fn stationary_start_stops_immediately() {
    let inst = make_pathology().unwrap();
    let cfg = ProxLinearConfig { max_outer: 10, tol: 1e-10, ..Default::default() };
    let trace = run_prox_linear(&inst.problem, &v(&[1.0]), &cfg).unwrap();
    assert_eq!(trace.n_steps(), 1);
    assert_eq!(trace.stop, StopReason::Tolerance);
    assert_eq!(trace.certified_point(), &v(&[1.0]));
}

#[test]
fn overlong_steps_are_caught() {
    let inst = make_pathology().unwrap();
    let cfg = ProxLinearConfig { t: Some(100.0), max_outer: 5, ..Default::default() };
    let err = run_prox_linear(&inst.problem, &v(&[0.3]), &cfg).unwrap_err();
    assert!(matches!(err, Error::StepIncreasedObjective { k: 0, .. }));
}

#[test]
fn counters_accumulate_along_the_trace() {
    let inst = make_phase_retrieval(4, 8, 2).unwrap();
    let cfg = ProxLinearConfig { max_outer: 6, ..Default::default() };
    let trace = run_prox_linear(&inst.problem, &inst.start, &cfg).unwrap();
    assert_eq!(trace.counters, trace.records.last().unwrap().counters);
    for w in trace.records.windows(2) {
        assert!(w[1].counters.dominates(&w[0].counters));
    }
    assert_eq!(trace.counters.n_c_eval as usize, trace.n_steps() + 1);
}

#[test]
fn zero_schedule_matches_the_exact_method() {
    let inst = make_phase_retrieval(5, 10, 4).unwrap();
    let cfg = ProxLinearConfig { max_outer: 12, ..Default::default() };
    let exact = run_prox_linear(&inst.problem, &inst.start, &cfg).unwrap();
    let gap = run_inexact_function_gap(&inst.problem, &inst.start, &cfg).unwrap();
    let dual = run_inexact_dual_stationary(&inst.problem, &inst.start, &cfg).unwrap();
    assert_eq!(exact.points, gap.points);
    assert_eq!(exact.points, dual.points);
    for (a, b) in exact.records.iter().zip(&gap.records) {
        assert_eq!(a.prox_grad_norm, b.prox_grad_norm);
    }
}

#[test]
fn constant_errors_still_satisfy_the_recomputed_bound() {
    let inst = make_phase_retrieval(5, 10, 6).unwrap();
    let cfg = ProxLinearConfig {
        max_outer: 20,
        schedule: ErrorSchedule::Constant { value: 0.5 },
        inner: InnerSolver::DualAccelerated,
        record_true: true,
        ..Default::default()
    };
    let trace = run_inexact_function_gap(&inst.problem, &inst.start, &cfg).unwrap();
    let checks = function_gap_rate_checks(&trace).unwrap();
    for c in &checks {
        let sum = 0.5 * c.n as f64;
        let f0 = trace.records[0].f_val;
        let f_n = if c.n < trace.n_steps() { trace.records[c.n].f_val } else { trace.final_value };
        let rhs = 2.0 * (f0 - f_n + sum) / (trace.step * c.n as f64);
        assert!((rhs - c.rhs).abs() <= 1e-12 * rhs.abs());
        assert!(c.holds(1e-9));
    }
}

#[test]
fn gap_surrogate_dominates_true_prox_gradient() {
    let inst = make_phase_retrieval(5, 10, 7).unwrap();
    let cfg = ProxLinearConfig {
        max_outer: 15,
        schedule: ErrorSchedule::InverseSquare { scale: 1.0 },
        inner: InnerSolver::DualAccelerated,
        record_true: true,
        ..Default::default()
    };
    let trace = run_inexact_function_gap(&inst.problem, &inst.start, &cfg).unwrap();
    for r in &trace.records {
        assert!(r.prox_grad_true.unwrap() <= r.prox_grad_norm * (1.0 + 1e-9) + 1e-12);
    }
}

#[test]
fn primal_fgm_cannot_certify_a_gap() {
    let p = smooth_affine_problem();
    let cfg = ProxLinearConfig {
        schedule: ErrorSchedule::InverseSquare { scale: 1.0 },
        inner: InnerSolver::FgmPrimal,
        ..Default::default()
    };
    assert!(matches!(run_inexact_function_gap(&p, &Vector::zeros(3), &cfg), Err(Error::CertificateMissing { .. })));
}

#[test]
fn dual_stationary_surrogate_and_descent() {
    let inst = make_phase_retrieval(5, 10, 8).unwrap();
    for inner in [InnerSolver::DualAccelerated, InnerSolver::FgmDual] {
        let cfg = ProxLinearConfig {
            max_outer: 15,
            schedule: ErrorSchedule::InverseSquare { scale: 1.0 / inst.problem.lipschitz() },
            inner,
            record_true: true,
            ..Default::default()
        };
        let trace = run_inexact_dual_stationary(&inst.problem, &inst.start, &cfg).unwrap();
        for r in &trace.records {
            assert!(r.prox_grad_true.unwrap() <= r.prox_grad_norm * (1.0 + 1e-9) + 1e-12);
        }
        let checks = dual_stationary_rate_checks(&trace, inst.problem.lipschitz()).unwrap();
        assert!(checks.iter().all(|c| c.holds(1e-9)));
    }
}

#[test]
fn fgm_dual_stops_within_the_iteration_count() {
    let inst = make_phase_retrieval(4, 8, 9).unwrap();
    let m = 8;
    let h = Arc::new(crate::prox::MoreauEnvelope::new(Arc::new(L1Norm::new(1.0 / m as f64, m)), 0.05));
    let p = inst.problem.with_h(h.clone()).unwrap();
    let lip = p.lipschitz();
    let l_h = h.grad_lipschitz().unwrap();
    let cfg = ProxLinearConfig {
        max_outer: 8,
        schedule: ErrorSchedule::InverseSquare { scale: 1.0 / lip },
        inner: InnerSolver::FgmDual,
        ..Default::default()
    };
    let trace = run_inexact_dual_stationary(&p, &inst.start, &cfg).unwrap();
    let t = trace.step;
    for (k, r) in trace.records.iter().enumerate() {
        let x = &trace.points[k];
        let op = crate::linalg::spectral_norm(&p.c().jacobian(x));
        let eps = cfg.schedule.eps(k + 1);
        let count =
            1.0 + ((t * op * op * l_h / 2.0).sqrt() * (8.0 * t * t * op.powi(4) * lip * lip / (eps * eps)).ln()).ceil();
        assert!(r.inner_iters as f64 <= count, "step {k}: {} > {count}", r.inner_iters);
    }
}

#[test]
fn rate_constants_are_validated() {
    assert!(RateConstants::new(1.0, 0.5).is_ok());
    for (g, t) in [(1.0, 0.0), (1.0, 1.0), (-1.0, 0.5), (1.0, f64::NAN)] {
        assert!(matches!(RateConstants::new(g, t), Err(Error::InvalidRateConstants { .. })));
    }
}

#[test]
fn inner_iteration_count() {
    let t = 0.5;
    assert_eq!(coupled_inner_iterations(t, RateConstants::new(1.0 / (4.0 * t), 0.3).unwrap()), 1);
    assert_eq!(coupled_inner_iterations(t, RateConstants::new(0.01, 0.3).unwrap()), 1);
    let r = RateConstants::new(50.0, 0.1).unwrap();
    assert_eq!(coupled_inner_iterations(t, r), (100f64.ln() / 0.1).ceil() as usize);
}

#[test]
fn plus_constants_formula() {
    let r = plus_constants(RateConstants::new(1.0, 0.1).unwrap(), 2.0).unwrap();
    assert_eq!(r, RateConstants { gamma: 1.0, tau: 0.1 });
}

#[test]
fn fgm_subscheme_uses_the_documented_count() {
    let inst = make_phase_retrieval(4, 8, 10).unwrap();
    let m = 8;
    let h = Arc::new(crate::prox::MoreauEnvelope::new(Arc::new(L1Norm::new(1.0 / m as f64, m)), 0.05));
    let p = inst.problem.with_h(h.clone()).unwrap();
    let mu = p.mu();
    let cfg = ProxLinearConfig { max_outer: 5, ..Default::default() };
    let trace = run_coupled(&p, &inst.start, &cfg, &FgmSubscheme).unwrap();
    let l_h = h.grad_lipschitz().unwrap();
    for (k, r) in trace.records.iter().enumerate() {
        let op = crate::linalg::spectral_norm(&p.c().jacobian(&trace.points[k]));
        let q = op * op * l_h / mu;
        let expect = ((2.0 * q).sqrt() * q.ln()).ceil().max(1.0) as usize;
        assert_eq!(r.inner_iters, expect);
    }
}

#[test]
fn coupled_descent_on_a_deterministic_instance() {
    let p = smooth_affine_problem();
    let cfg = ProxLinearConfig { max_outer: 25, record_true: true, ..Default::default() };
    for scheme in [&FgmSubscheme as &dyn LinearlyConvergentSubscheme, &wrap_plus(ProxGradientScheme)] {
        let trace = run_coupled(&p, &v(&[1.5, -1.5, 1.0]), &cfg, scheme).unwrap();
        let t = trace.step;
        let f: Vec<f64> = trace.records.iter().map(|r| r.f_val).chain([trace.final_value]).collect();
        for (k, r) in trace.records.iter().enumerate() {
            let g = r.prox_grad_true.unwrap();
            assert!(f[k] - f[k + 1] >= 0.25 * t * g * g - descent_slack(f[k]));
            assert!(g <= r.prox_grad_norm * (1.0 + 1e-9) + 1e-12);
        }
        assert!(coupled_rate_checks(&trace).unwrap().iter().all(|c| c.holds(1e-9)));
    }
}

#[test]
fn plus_wrapper_keeps_a_minimizer_fixed() {
    let p = smooth_affine_problem();
    let oracle = Oracle::new(&p);
    let y = v(&[0.2, 0.1, -0.3]);
    let model = LinearizedModel::new(&oracle, &y, 1.0).unwrap();
    let pm = PrimalModel::new(&model).unwrap();
    let star = crate::fast_gradient::fgm_run_small_subgradient(&pm, &y, 1e-13, 100_000).unwrap().x_hat;
    let out = wrap_plus(ProxGradientScheme).run(&model, &star, 5, 0).unwrap();
    assert!((&out - &star).norm() < 1e-10);
}

#[test]
fn plus_wrapper_meets_its_distance_bound() {
    let p = smooth_affine_problem();
    let oracle = Oracle::new(&p);
    let y = v(&[1.0, -1.0, 0.5]);
    let model = LinearizedModel::new(&oracle, &y, 0.5).unwrap();
    let pm = PrimalModel::new(&model).unwrap();
    let star = crate::fast_gradient::fgm_run_small_subgradient(&pm, &y, 1e-13, 100_000).unwrap().x_hat;
    let best = pm.value(&star).unwrap();
    let plus = wrap_plus(ProxGradientScheme);
    let rate = plus.rate_constants(&model).unwrap();
    let z0 = v(&[-2.0, 2.0, 2.0]);
    for i in 1..30 {
        let z = plus.run(&model, &z0, i, 0).unwrap();
        let gap = pm.value(&z).unwrap() - best;
        let bound = rate.gamma * (1.0 - rate.tau).powi(i as i32) * (&z0 - &star).norm_squared();
        assert!(gap <= bound + 1e-12, "i = {i}: {gap} > {bound}");
    }
}

#[test]
fn primal_model_quantities() {
    let p = smooth_affine_problem();
    let oracle = Oracle::new(&p);
    let y = v(&[0.3, -0.2, 0.1]);
    let model = LinearizedModel::new(&oracle, &y, 0.7).unwrap();
    let pm = PrimalModel::new(&model).unwrap();
    let z = v(&[0.5, 0.5, -1.0]);
    let total = pm.value(&z).unwrap();
    assert!((total - model.value(&z).unwrap()).abs() < 1e-13);
    assert!((pm.strong_convexity() - 1.0 / 0.7).abs() < 1e-15);
    let nonsmooth = make_phase_retrieval(3, 6, 1).unwrap();
    let o2 = Oracle::new(&nonsmooth.problem);
    let m2 = LinearizedModel::new(&o2, &nonsmooth.start, 1.0).unwrap();
    assert!(PrimalModel::new(&m2).is_err());
    let _ = Zero.value(&z);
}
