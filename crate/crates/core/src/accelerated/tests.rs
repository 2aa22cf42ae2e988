use rand::Rng;

use super::*;
use crate::problems::{
    make_additive_composite, make_lad, make_nls_box, make_pathology, make_phase_retrieval, ProblemInstance,
};
use crate::prox_linear::ErrorSchedule;
use crate::rng::{gaussian_vector, seeded};

fn quartic() -> ErrorSchedule {
    ErrorSchedule::PowerLaw { eps0: 1.0, q: 3.0 }
}

fn lad_reference(inst: &ProblemInstance) -> (Vector, f64) {
    let r = inst.reference.as_ref().unwrap();
    (r.minimizer.clone().unwrap(), r.inf_value)
}

#[test]
fn weight_rules_satisfy_the_recursion() {
    for rule in [WeightRule::Standard, WeightRule::Fista] {
        let a = rule.weights(400);
        assert_eq!(a[0], 1.0);
        for k in 1..a.len() {
            let lhs = (1.0 - a[k]) / (a[k] * a[k]);
            assert!(lhs <= 1.0 / (a[k - 1] * a[k - 1]) * (1.0 + 1e-12), "{rule:?} k={k}");
        }
    }
    let f = WeightRule::Fista.weights(50);
    for k in 1..f.len() {
        assert!(((1.0 - f[k]) / (f[k] * f[k]) - 1.0 / (f[k - 1] * f[k - 1])).abs() < 1e-9 * k as f64 * k as f64);
    }
}

#[test]
fn unit_weight_same_center_is_the_prox_linear_step() {
    let inst = make_phase_retrieval(4, 12, 3).unwrap();
    let oracle = Oracle::new(&inst.problem);
    let t = 1.0 / inst.problem.mu();
    let y = &inst.start;
    let two = LinearizedModel::two_center(&oracle, y, y, t, 1.0).unwrap();
    let z = solve_two_center(&two, 1e-12, 200_000).unwrap().x;
    let exact = solve_exact(&LinearizedModel::new(&oracle, y, t).unwrap(), None).unwrap().x;
    assert!((z - exact).norm() < 1e-8);
}

#[test]
fn additive_composite_step_ignores_the_weight() {
    let inst = make_additive_composite(5, 2).unwrap();
    let p = &inst.problem;
    let oracle = Oracle::new(p);
    let mut rng = seeded(6);
    let (y, v) = (gaussian_vector(&mut rng, 5), gaussian_vector(&mut rng, 5));
    let t = 0.3;
    let grad = p.c().vjp(&y, &Vector::from_element(1, 1.0));
    let expect = p.g().prox(t, &(&v - grad * t));
    for alpha in [1.0, 0.5, 0.1] {
        let m = LinearizedModel::two_center(&oracle, &y, &v, t, alpha).unwrap();
        let z = solve_two_center(&m, 1e-12, 10_000).unwrap().x;
        assert!((z - &expect).norm() < 1e-12, "alpha {alpha}");
    }
}

#[test]
fn half_weight_step_matches_grid_search() {
    let inst = make_phase_retrieval(2, 6, 4).unwrap();
    let oracle = Oracle::new(&inst.problem);
    let mut rng = seeded(1);
    let (y, v) = (gaussian_vector(&mut rng, 2) * 0.5, gaussian_vector(&mut rng, 2) * 0.5);
    let model = LinearizedModel::two_center(&oracle, &y, &v, 0.4, 0.5).unwrap();
    let z = solve_two_center(&model, 1e-12, 200_000).unwrap().x;
    let f = |p: &Vector| model.value(p).unwrap();
    let mut best = (f64::INFINITY, Vector::zeros(2));
    let (mut center, mut half) = (Vector::zeros(2), 3.0);
    for _ in 0..6 {
        let n = 80;
        for i in 0..=n {
            for j in 0..=n {
                let p = Vector::from_vec(vec![
                    center[0] - half + 2.0 * half * i as f64 / n as f64,
                    center[1] - half + 2.0 * half * j as f64 / n as f64,
                ]);
                let val = f(&p);
                if val < best.0 {
                    best = (val, p);
                }
            }
        }
        center = best.1.clone();
        half *= 0.1;
    }
    assert!(f(&z) <= best.0 + 1e-10);
    assert!((&z - &best.1).norm() < 1e-4, "{z} vs {}", best.1);
}

#[test]
fn first_step_ignores_the_initial_point() {
    let inst = make_lad(3, 12, 1).unwrap();
    let mut rng = seeded(2);
    let v0 = gaussian_vector(&mut rng, 3);
    let cfg = AccelConfig::new(1.0, 1);
    let a = run_accelerated(&inst.problem, &inst.start, &v0, &cfg).unwrap();
    let b = run_accelerated(&inst.problem, &inst.test_point, &v0, &cfg).unwrap();
    assert_eq!(a.steps[0].a, 1.0);
    assert_eq!(a.steps[0].y, v0);
    assert_eq!(a.steps[0].x, b.steps[0].x);
}

#[test]
fn mu_tilde_must_exceed_mu() {
    let inst = make_phase_retrieval(3, 6, 1).unwrap();
    let mu = inst.problem.mu();
    let err = run_accelerated(&inst.problem, &inst.start, &inst.start, &AccelConfig::new(mu, 3)).unwrap_err();
    assert_eq!(err, Error::InvalidMuTilde { mu_tilde: mu, mu });
}

#[test]
fn convex_value_bound_and_per_step_inequalities() {
    let inst = make_lad(3, 12, 5).unwrap();
    let (x_star, f_star) = lad_reference(&inst);
    let p = &inst.problem;
    let v0 = &inst.start;
    let run = run_accelerated(p, &inst.test_point, v0, &AccelConfig::new(2.0, 40)).unwrap();
    let checks = run.value_checks(&x_star, f_star).unwrap().expect("reference below iterates");
    for c in &checks {
        assert!(c.holds(1e-9 * (1.0 + f_star)), "{c:?}");
    }
    let meta = ConvexityMeta::convex();
    for c in run.stationarity_checks(&x_star, f_star, &meta).unwrap().unwrap() {
        assert!(c.holds(1e-9), "{c:?}");
    }
    let oracle = Oracle::new(p);
    let mut rng = seeded(3);
    for k in 1..=run.n_steps() {
        assert!(run.telescoping_slack(p, k, &x_star, &meta).unwrap() >= -1e-9 * (1.0 + f_star), "k={k}");
        let s = &run.steps[k - 1];
        let v_prev = if k == 1 { v0.clone() } else { run.steps[k - 2].v.clone() };
        let m = LinearizedModel::two_center(&oracle, &s.y, &v_prev, 1.0 / (s.mu_tilde * s.a), s.a).unwrap();
        for _ in 0..10 {
            let w = &s.v + gaussian_vector(&mut rng, 3) * rng.gen_range(0.01..1.0);
            assert!(three_point_slack(&m, &s.v, &w).unwrap() >= -1e-8);
        }
    }
}

#[test]
fn zero_schedules_reproduce_the_exact_method() {
    let inst = make_lad(3, 10, 2).unwrap();
    let cfg = AccelConfig::new(1.5, 12);
    let exact = run_accelerated(&inst.problem, &inst.start, &inst.start, &cfg).unwrap();
    let z = ErrorSchedule::Zero;
    let stat = run_accelerated_inexact_stationary(&inst.problem, &inst.start, &inst.start, &cfg, z, z).unwrap();
    let gap = run_accelerated_inexact_gap(&inst.problem, &inst.start, &inst.start, &cfg, z, z).unwrap();
    for (a, b) in exact.steps.iter().zip(&stat.steps).chain(exact.steps.iter().zip(&gap.steps)) {
        assert_eq!(a.x, b.x);
        assert_eq!(a.v, b.v);
        assert!((a.grad_norm_y - b.grad_norm_y).abs() <= 1e-6 * (1.0 + a.grad_norm_y));
    }
}

#[test]
fn inexact_variants_meet_their_bounds() {
    let inst = make_lad(3, 12, 7).unwrap();
    let (x_star, f_star) = lad_reference(&inst);
    let cfg = AccelConfig::new(2.0, 25);
    let meta = ConvexityMeta::convex();
    let p = &inst.problem;
    let runs = [
        run_accelerated_inexact_stationary(p, &inst.start, &inst.start, &cfg, quartic(), quartic()).unwrap(),
        run_accelerated_inexact_gap(p, &inst.start, &inst.start, &cfg, quartic(), quartic()).unwrap(),
    ];
    for run in &runs {
        for s in &run.steps {
            assert!(s.eps_attained <= s.eps && s.delta_attained <= s.delta, "{:?}", run.variant);
        }
        for c in run.value_checks(&x_star, f_star).unwrap().unwrap() {
            assert!(c.holds(1e-9 * (1.0 + f_star)), "{:?}: {c:?}", run.variant);
        }
        for c in run.stationarity_checks(&x_star, f_star, &meta).unwrap().unwrap() {
            assert!(c.holds(1e-9), "{:?}: {c:?}", run.variant);
        }
    }
}

#[test]
fn distance_constant_stays_bounded_for_quartic_schedules() {
    let meta = ConvexityMeta::convex();
    let eval = |n: usize| {
        let a = WeightRule::Standard.weights(n);
        let e: Vec<f64> = (1..=n).map(|i| quartic().eps(i)).collect();
        gap_distance_bound(2.0, 1.0, &meta, &e, &e, &a)
    };
    let (a100, a1000, a10000) = (eval(100), eval(1000), eval(10_000));
    assert!(a100 <= a1000 && a1000 <= a10000);
    assert!(a10000 - a1000 < a1000 - a100);
    assert!(a10000 < 2.0 * eval(10));
    let zero = vec![0.0; 5];
    let a = WeightRule::Standard.weights(5);
    assert_eq!(gap_distance_bound(2.0, 4.0, &meta, &zero, &zero, &a), 2.0);
}

#[test]
fn short_steps_never_backtrack() {
    let inst = make_pathology().unwrap();
    let mu = inst.problem.mu();
    let cfg = BacktrackConfig { t0: 1.0 / mu, eta: 0.5, alpha: 0.5, n_steps: 30, timing: false };
    let run = run_accelerated_backtracking(&inst.problem, &inst.start, &inst.start, &cfg).unwrap();
    assert!(run.steps.iter().all(|s| s.trials == 1));
}

#[test]
fn long_steps_backtrack_within_the_cap() {
    let inst = make_phase_retrieval(3, 9, 2).unwrap();
    let mu = inst.problem.mu();
    let (eta, alpha) = (0.5, 0.5);
    let cfg = BacktrackConfig { t0: 100.0 / mu, eta, alpha, n_steps: 40, timing: false };
    let run = run_accelerated_backtracking(&inst.problem, &inst.start, &inst.start, &cfg).unwrap();
    assert_eq!(run.steps[0].trial_cap, 8);
    let (mmax, m0) = run.backtracking_mu_tilde().unwrap();
    assert_eq!(m0, mu / 50.0);
    let mut prev = m0;
    for s in &run.steps {
        assert!(s.trials <= s.trial_cap);
        assert!(s.mu_tilde >= prev && s.mu_tilde <= mmax * (1.0 + 1e-15));
        prev = s.mu_tilde;
    }
}

#[test]
fn backtracking_convex_bound() {
    let inst = make_lad(3, 12, 3).unwrap();
    let (x_star, f_star) = lad_reference(&inst);
    let cfg = BacktrackConfig { t0: 2.0, eta: 0.5, alpha: 0.5, n_steps: 30, timing: false };
    let run = run_accelerated_backtracking(&inst.problem, &inst.start, &inst.start, &cfg).unwrap();
    for c in run.value_checks(&x_star, f_star).unwrap().unwrap() {
        assert!(c.holds(1e-9 * (1.0 + f_star)), "{c:?}");
    }
    for c in run.stationarity_checks(&x_star, f_star, &ConvexityMeta::convex()).unwrap().unwrap() {
        assert!(c.holds(1e-9), "{c:?}");
    }
}

#[test]
fn nonconvex_bound_with_worst_case_constants() {
    let inst = make_nls_box(3, 4, 2).unwrap();
    let p = &inst.problem;
    let mu = p.mu();
    let reference = inst.reference.as_ref().unwrap();
    let x_star = reference.minimizer.clone().unwrap();
    let run = run_accelerated(p, &inst.start, &inst.start, &AccelConfig::new(2.0 * mu, 20)).unwrap();
    let meta = ConvexityMeta { rho: mu, r: mu, diameter: p.domain_diameter() };
    assert!(meta.diameter.is_some());
    for c in run.stationarity_checks(&x_star, reference.inf_value, &meta).unwrap().unwrap() {
        assert!(c.holds(1e-9), "{c:?}");
    }
    for k in 1..=run.n_steps() {
        assert!(run.telescoping_slack(p, k, &x_star, &meta).unwrap() >= -1e-9, "k={k}");
    }
}

#[test]
fn invalid_reference_skips_the_checks() {
    let inst = make_lad(3, 12, 5).unwrap();
    let run = run_accelerated(&inst.problem, &inst.start, &inst.start, &AccelConfig::new(2.0, 5)).unwrap();
    let worst = run.steps.iter().map(|s| s.f_x).fold(f64::INFINITY, f64::min) + 1.0;
    assert!(run.value_checks(&inst.start, worst).unwrap().is_none());
}

#[test]
fn fista_weights_have_no_stated_bound() {
    let inst = make_lad(3, 12, 5).unwrap();
    let cfg = AccelConfig { weights: WeightRule::Fista, ..AccelConfig::new(2.0, 5) };
    let run = run_accelerated(&inst.problem, &inst.start, &inst.start, &cfg).unwrap();
    assert!(run.value_bound(3, 1.0).is_err());
}

#[test]
fn trace_view_matches_the_steps() {
    let inst = make_lad(3, 12, 5).unwrap();
    let run = run_accelerated(&inst.problem, &inst.start, &inst.start, &AccelConfig::new(2.0, 6)).unwrap();
    let trace = run.to_trace();
    assert_eq!(trace.n_steps(), 6);
    assert_eq!(trace.points.len(), 7);
    assert_eq!(trace.final_value, run.steps[5].f_x);
    for w in trace.records.windows(2) {
        assert!(w[1].counters.dominates(&w[0].counters));
    }
    assert_eq!(backtracking_trial_cap(1.0, 0.0, 0.5), 1);
    assert_eq!(backtracking_trial_cap(0.1, 1.0, 0.5), 1);
}
