use std::sync::Arc;

use super::*;
use crate::problems::{make_lad, make_pathology, make_phase_retrieval, zoo};
use crate::prox::{L1Norm, SquaredL2};
use crate::rng::gaussian_vector;

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn pathology_value(x: f64) -> f64 {
    (x * x - 1.0).abs()
}

/// Grid minimization of `|z² − 1| + (z − x)²/(2ν)` with successive refinement.
fn grid_prox(x: f64, nu: f64) -> f64 {
    let phi = |z: f64| pathology_value(z) + (z - x).powi(2) / (2.0 * nu);
    let (mut center, mut half) = (x, 4.0);
    for _ in 0..8 {
        let n = 2000;
        let mut best = (f64::INFINITY, center);
        for i in 0..=n {
            let z = center - half + 2.0 * half * i as f64 / n as f64;
            let v = phi(z);
            if v < best.0 {
                best = (v, z);
            }
        }
        center = best.1;
        half *= 0.01;
    }
    center
}

#[test]
fn minimizer_is_a_fixed_point() {
    let inst = make_pathology().unwrap();
    let o = EnvelopeOracle::new(&inst.problem, 0.1, 1e-12).unwrap();
    let p = o.composite_prox_point(&v1(1.0)).unwrap();
    assert!((p.x_hat[0] - 1.0).abs() < 1e-6);
}

#[test]
fn pathology_prox_matches_grid() {
    let inst = make_pathology().unwrap();
    let nu = 1.0 / (4.0 * inst.problem.mu());
    let o = EnvelopeOracle::new(&inst.problem, nu, 1e-12).unwrap();
    for x in [2.0, 1.3, 0.4, -0.7] {
        let p = o.composite_prox_point(&v1(x)).unwrap();
        assert!((p.x_hat[0] - grid_prox(x, nu)).abs() < 1e-6, "x={x}: {} vs {}", p.x_hat[0], grid_prox(x, nu));
        assert!(p.dist < 1e-5);
    }
}

#[test]
fn convex_prox_matches_closed_form_subproblem() {
    // For linear c the prox of h∘c is a single prox-linear step at t = ν.
    let inst = make_lad(3, 8, 2).unwrap();
    let nu = 0.2;
    let o = EnvelopeOracle::new(&inst.problem, nu, 1e-11).unwrap();
    let oracle = Oracle::new(&inst.problem);
    let x = &inst.start;
    let direct = solve_exact(&LinearizedModel::new(&oracle, x, nu).unwrap(), None).unwrap().x;
    let p = o.composite_prox_point(x).unwrap();
    assert!((p.x_hat - direct).norm() < 1e-5);
}

#[test]
fn parameter_must_be_below_inverse_mu() {
    let inst = make_pathology().unwrap();
    let mu = inst.problem.mu();
    assert!(EnvelopeOracle::new(&inst.problem, 1.0 / mu, 1e-10).is_err());
    assert!(EnvelopeOracle::new(&inst.problem, 0.0, 1e-10).is_err());
}

#[test]
fn oracle_is_stable_across_tolerances() {
    let inst = make_phase_retrieval(4, 10, 3).unwrap();
    let o8 = EnvelopeOracle::new(&inst.problem, 0.1, 1e-8).unwrap();
    let o10 = EnvelopeOracle::new(&inst.problem, 0.1, 1e-10).unwrap();
    let a = o8.composite_prox_point(&inst.start).unwrap().x_hat;
    let b = o10.composite_prox_point(&inst.start).unwrap().x_hat;
    assert!((a - b).norm() < 1e-4);
}

#[test]
fn exhausted_oracle_reports_budget() {
    let inst = make_phase_retrieval(4, 10, 3).unwrap();
    let o = EnvelopeOracle::new(&inst.problem, 0.3, 1e-14).unwrap().with_max_steps(1);
    assert!(matches!(o.composite_prox_point(&inst.start), Err(Error::BudgetExhausted { iters: 1, .. })));
}

#[test]
fn constants_at_the_natural_step() {
    let (lo, hi) = sandwich_constants(0.5, 2.0);
    assert!((lo - 0.25).abs() < 1e-15);
    assert!((hi - 1.5 * (1.0 + 1.0 / 2f64.sqrt())).abs() < 1e-15);
    assert!((hi - 2.5607).abs() < 1e-4);
}

#[test]
fn sandwich_on_the_zoo() {
    for inst in zoo(1).unwrap() {
        let p = &inst.problem;
        let mu = p.mu();
        let steps: Vec<f64> = if mu > 0.0 { vec![1.0 / mu, 0.5 / mu, 2.0 / (3.0 * mu)] } else { vec![1.0, 0.3] };
        for t in steps {
            let c = check_sandwich(p, &inst.test_point, t, 1e-12, 1e-5).unwrap();
            assert!(c.holds(), "{} t={t}: {c:?}", inst.name());
        }
    }
}

#[test]
fn sandwich_vanishes_at_stationary_points() {
    let inst = make_pathology().unwrap();
    let c = check_sandwich(&inst.problem, &v1(1.0), 0.5, 1e-12, 1e-5).unwrap();
    assert!(c.holds());
    assert!(c.prox_grad_norm < 1e-9 && c.envelope_grad_norm < 1e-5);
    let zero = check_sandwich(&inst.problem, &v1(0.0), 0.5, 1e-12, 1e-5).unwrap();
    assert!(zero.prox_grad_norm < 1e-9 && zero.envelope_grad_norm < 1e-5, "{zero:?}");
}

#[test]
fn envelope_gradient_vanishes_only_at_stationary_points() {
    let inst = make_pathology().unwrap();
    let o = EnvelopeOracle::new(&inst.problem, 0.2, 1e-12).unwrap();
    for (x, stationary) in [(1.0, true), (-1.0, true), (0.0, true), (0.5, false), (1.5, false)] {
        let (g, err) = o.envelope_gradient(&v1(x)).unwrap();
        assert_eq!(g.norm() <= err + 1e-9, stationary, "x={x}: {}", g.norm());
    }
}

#[test]
fn near_stationarity_on_the_pathology() {
    let inst = make_pathology().unwrap();
    let c = near_stationarity_certificate(&inst.problem, &v1(1.1), 1e-12).unwrap();
    assert!(c.holds(1e-6), "{c:?}");
    assert!(c.value_drop > 0.0);
    let s = near_stationarity_certificate(&inst.problem, &v1(1.0), 1e-12).unwrap();
    assert!(s.dist < 1e-6 && s.prox_grad_norm < 1e-9 && s.holds(1e-6));
}

#[test]
fn near_stationarity_on_random_points() {
    let inst = make_phase_retrieval(4, 10, 5).unwrap();
    let mut rng = seeded(2);
    for _ in 0..20 {
        let x = inst.sample_point(&mut rng, 1.0);
        let c = near_stationarity_certificate(&inst.problem, &x, 1e-11).unwrap();
        assert!(c.holds(1e-6), "{c:?}");
    }
}

#[test]
fn weak_convexity_probes() {
    let origin = Vector::zeros(2);
    let convex = |x: &Vector| x.norm_squared() + x.lp_norm(1);
    assert!(weak_convexity_probe(convex, 0.0, &origin, 3.0, 2000, 1) <= 1e-12);
    let path = |x: &Vector| pathology_value(x[0]);
    assert!(weak_convexity_probe(path, 2.0, &Vector::zeros(1), 3.0, 10_000, 2) <= 1e-9);
    let concave = |x: &Vector| -x[0] * x[0];
    assert!(weak_convexity_probe(concave, 2.0, &Vector::zeros(1), 2.0, 2000, 3).abs() <= 1e-9);
    assert!(weak_convexity_probe(concave, 1.0, &Vector::zeros(1), 2.0, 2000, 3) > 1e-3);
}

#[test]
fn penalization_examples() {
    let quad = SquaredL2 { weight: 1.0 };
    let c = quadratic_penalization_check(&quad, &v1(1.0), 1.0, 0.5, 1.0).unwrap();
    assert!((c.step_norm - 0.5).abs() < 1e-15);
    assert!((c.strong_bound - (0.5f64 / 1.5).sqrt()).abs() < 1e-15);
    assert!(c.holds(0.0));
    let l1 = L1Norm::new(1.0, 1);
    let c = quadratic_penalization_check(&l1, &v1(0.3), 1.0, 0.3, 0.0).unwrap();
    assert!((c.step_norm - 0.3).abs() < 1e-15);
    assert!((c.plain_bound - 0.6f64.sqrt()).abs() < 1e-15);
    assert!(c.holds(0.0));
    let at_min = quadratic_penalization_check(&l1, &v1(0.0), 7.0, 0.0, 0.0).unwrap();
    assert_eq!(at_min.step_norm, 0.0);
    assert!(at_min.holds(0.0));
}

#[test]
fn penalization_on_random_points_and_steps() {
    let quad: Arc<dyn ProxFunction> = Arc::new(SquaredL2 { weight: 2.0 });
    let mut rng = seeded(8);
    for _ in 0..200 {
        let x = gaussian_vector(&mut rng, 3);
        let lambda = rng.gen_range(0.01..10.0);
        let eps = quad.value(&x);
        let c = quadratic_penalization_check(quad.as_ref(), &x, lambda, eps, 2.0).unwrap();
        assert!(c.holds(1e-12), "{c:?}");
    }
}

#[test]
fn central_differences_recover_a_gradient() {
    let f = |x: &Vector| x[0].sin() * x[1] + x[1].powi(3);
    let x = Vector::from_vec(vec![0.3, -1.2]);
    let g = central_difference_gradient(f, &x, 1e-5);
    let exact = Vector::from_vec(vec![0.3f64.cos() * -1.2, 0.3f64.sin() + 3.0 * 1.44]);
    assert!((g - exact).norm() < 1e-8);
}
