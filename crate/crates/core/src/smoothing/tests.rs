use std::sync::Arc;

use rand::Rng;

use super::*;
use crate::oracle::objective_value;
use crate::problems::{make_nls_box, make_phase_retrieval};
use crate::prox::{L1Norm, ProxFunction};
use crate::rng::seeded;

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

#[test]
fn vanishing_parameter_recovers_the_objective() {
    let inst = make_phase_retrieval(5, 15, 2).unwrap();
    let sm = make_smoothed(&inst.problem, 1e-12).unwrap();
    let mut rng = seeded(4);
    for _ in 0..20 {
        let x = inst.sample_point(&mut rng, 1.5);
        let (f, f_nu) = (objective_value(&inst.problem, &x).unwrap(), objective_value(&sm, &x).unwrap());
        assert!((f - f_nu).abs() < 1e-10, "{f} vs {f_nu}");
    }
}

#[test]
fn envelope_of_l1_is_huber() {
    let nu = 0.5;
    let h = MoreauEnvelope::new(Arc::new(L1Norm::new(1.0, 3)), nu);
    let z = v(&[0.2, -1.0, 3.0]);
    let expect = 0.2 * 0.2 / (2.0 * nu) + (1.0 - nu / 2.0) + (3.0 - nu / 2.0);
    assert!((h.value(&z) - expect).abs() < 1e-12);
    assert_eq!(h.grad_lipschitz(), Some(2.0));
    assert_eq!(h.lipschitz(), Some((3.0f64).sqrt()));
}

#[test]
fn smoothed_objective_is_sandwiched() {
    let inst = make_phase_retrieval(6, 18, 7).unwrap();
    let p = &inst.problem;
    let nu = 0.05;
    let sm = make_smoothed(p, nu).unwrap();
    assert_eq!(sm.lipschitz(), p.lipschitz());
    assert_eq!(sm.h().grad_lipschitz(), Some(1.0 / nu));
    let bound = p.lipschitz().powi(2) * nu / 2.0;
    let mut rng = seeded(11);
    for _ in 0..100 {
        let x = inst.sample_point(&mut rng, 2.0);
        let gap = objective_value(p, &x).unwrap() - objective_value(&sm, &x).unwrap();
        assert!(gap >= -1e-14 && gap <= bound + 1e-14, "gap {gap}, bound {bound}");
    }
}

#[test]
fn non_positive_parameter_is_rejected() {
    let inst = make_phase_retrieval(3, 9, 1).unwrap();
    assert!(matches!(make_smoothed(&inst.problem, 0.0), Err(Error::InvalidParameter(_))));
}

#[test]
fn plan_loses_exactly_half_the_target() {
    for (seed, eps) in [(1u64, 1e-1), (2, 1e-2), (3, 3e-4)] {
        let inst = make_phase_retrieval(4, 12, seed).unwrap();
        let plan = SmoothingPlan::new(&inst.problem, eps).unwrap();
        assert!((plan.comparison_gap() - eps / 2.0).abs() <= 4.0 * f64::EPSILON * eps);
        assert!((plan.t * inst.problem.mu() - 1.0).abs() < 1e-15);
        assert_eq!(plan.inner_eps_target, eps / 2.0);
    }
}

#[test]
fn comparison_holds_at_random_points() {
    let inst = make_phase_retrieval(4, 12, 5).unwrap();
    let p = &inst.problem;
    let t = 1.0 / p.mu();
    let mut rng = seeded(9);
    for nu in [1e-3, 1e-2, 0.3] {
        let sm = make_smoothed(p, nu).unwrap();
        for _ in 0..10 {
            let x = inst.sample_point(&mut rng, 2.0);
            let chk = prox_gradient_comparison(p, &sm, nu, &x, t).unwrap();
            assert!(chk.holds(1e-9), "{chk:?}");
        }
    }
}

#[test]
fn smoothed_driver_certifies_both_inner_modes() {
    let inst = make_phase_retrieval(4, 12, 3).unwrap();
    let eps = 5e-2;
    let plan = SmoothingPlan::new(&inst.problem, eps).unwrap();
    let opts = SmoothedOptions { record_comparisons: true, ..Default::default() };
    for inner in [SmoothedInner::FgmDual, SmoothedInner::FgmPrimal] {
        let run = run_smoothed_driver(&inst.problem, &inst.start, &plan, inner, &opts).unwrap();
        assert!(run.true_norm <= eps, "{inner:?}: {}", run.true_norm);
        assert_eq!(run.comparisons.len(), run.trace.n_steps());
        for c in &run.comparisons {
            assert!(c.holds(1e-9), "{inner:?}: {c:?}");
        }
        let last = run.trace.records.last().unwrap();
        assert!(last.prox_grad_norm <= plan.inner_eps_target);
        assert!(last.prox_grad_true.unwrap() <= last.prox_grad_norm + 1e-9);
    }
}

#[test]
fn smoothing_an_already_smooth_outer_function() {
    let inst = make_phase_retrieval(4, 12, 8).unwrap();
    let m = 12;
    let hub = Arc::new(MoreauEnvelope::new(Arc::new(L1Norm::new(1.0 / m as f64, m)), 0.05));
    let p = inst.problem.with_h(hub).unwrap();
    let eps = 5e-2;
    let plan = SmoothingPlan::new(&p, eps).unwrap();
    let run = run_smoothed_driver(&p, &inst.start, &plan, SmoothedInner::FgmDual, &SmoothedOptions::default()).unwrap();
    assert!(run.true_norm <= eps);
}

#[test]
fn smoothed_driver_reports_exhaustion() {
    let inst = make_phase_retrieval(4, 12, 3).unwrap();
    let plan = SmoothingPlan::new(&inst.problem, 1e-6).unwrap();
    let opts = SmoothedOptions { max_outer: 2, ..Default::default() };
    let err = run_smoothed_driver(&inst.problem, &inst.start, &plan, SmoothedInner::FgmDual, &opts).unwrap_err();
    assert!(matches!(err, Error::BudgetExhausted { iters: 2, .. }), "{err:?}");
}

#[test]
fn budget_arithmetic_identity() {
    let plan = BudgetPlan::new(50_000, 0.7, 1.3, 2.1, 3.4).unwrap();
    let mu = plan.lipschitz * plan.beta;
    let ratio = 8.0 * plan.opnorm.powi(2) * plan.lipschitz.powi(2) / mu / plan.nominal_inner().powi(2);
    assert!((ratio - plan.eps_per_step()).abs() <= 1e-12 * plan.eps_per_step());
    assert!(plan.realized_gap_bound() <= plan.eps_per_step());
}

#[test]
fn budget_is_respected_for_random_plans() {
    let mut rng = seeded(21);
    let mut built = 0;
    for _ in 0..50 {
        let total = rng.gen_range(1..200_000usize);
        let q: f64 = rng.gen_range(0.01..10.0);
        let l: f64 = rng.gen_range(0.1..5.0);
        let beta: f64 = rng.gen_range(0.1..5.0);
        let opnorm: f64 = rng.gen_range(0.1..10.0);
        let required = 4.0 * 1.5f64.powf(1.5) * opnorm / (2.0 * beta * q / l).sqrt();
        match BudgetPlan::new(total, q, l, beta, opnorm) {
            Ok(plan) => {
                built += 1;
                assert!(total as f64 >= required);
                assert!((plan.n_outer + 1) * plan.per_step_inner <= total);
                assert!(plan.per_step_inner >= 1);
                assert!(plan.realized_gap_bound() <= plan.eps_per_step() * (1.0 + 1e-12));
            }
            Err(Error::BudgetTooSmall { required: r, .. }) => assert!((total as f64) < r.max(required) + 1.0),
            Err(e) => panic!("{e:?}"),
        }
    }
    assert!(built >= 25);
}

#[test]
fn small_budget_is_rejected() {
    let err = BudgetPlan::new(3, 1.0, 1.0, 1.0, 10.0).unwrap_err();
    assert!(matches!(err, Error::BudgetTooSmall { total: 3, .. }));
    assert!(BudgetPlan::new(10, 1.0, 1.0, 1.0, f64::INFINITY).is_err());
}

#[test]
fn budgeted_driver_meets_the_sufficient_budget_target() {
    let inst = make_nls_box(3, 4, 6).unwrap();
    let p = &inst.problem;
    let f0 = objective_value(p, &inst.start).unwrap();
    let q = f0;
    let eps = 0.3;
    let total = BudgetPlan::sufficient_total(f0, q, eps, p.lipschitz(), p.beta(), p.opnorm_bound());
    let plan = BudgetPlan::for_problem(p, total, q).unwrap();
    let (x, trace) = run_budgeted_driver(p, &inst.start, &plan, true).unwrap();
    assert_eq!(trace.n_steps(), plan.n_outer + 1);
    assert_eq!(trace.stop, StopReason::Budget);
    let used: usize = trace.records.iter().map(|r| r.inner_iters).sum();
    assert!(used <= total);
    let best = trace.records[..plan.n_outer].iter().map(|r| r.prox_grad_true.unwrap()).fold(f64::INFINITY, f64::min);
    assert!(best * best <= plan.stationarity_bound(f0) + 1e-12);
    assert!(best <= eps);
    let g_x = prox_gradient(&Oracle::new(p), &x, plan.step()).unwrap().0.norm();
    assert!(g_x <= eps, "{g_x}");
    for r in &trace.records {
        assert!(r.prox_grad_true.unwrap() <= r.prox_grad_norm + 1e-9);
    }
}
