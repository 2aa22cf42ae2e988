use std::sync::Arc;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::*;
use crate::linalg::Vector;

fn v(c: &[f64]) -> Vector {
    Vector::from_column_slice(c)
}

/// Minimizes `f(z) + (z − x)²/(2t)` on the line by a dense grid followed by
/// golden-section refinement.
fn brute_prox_1d(f: &dyn Fn(f64) -> f64, t: f64, x: f64) -> f64 {
    let obj = |z: f64| f(z) + (z - x).powi(2) / (2.0 * t);
    let (lo, hi) = (x - 20.0, x + 20.0);
    let n = 40_000;
    let mut best = lo;
    for i in 0..=n {
        let z = lo + (hi - lo) * i as f64 / n as f64;
        if obj(z) < obj(best) {
            best = z;
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut a, mut b) = (best - h, best + h);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if obj(c) <= obj(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn check_against_brute(f: &dyn ProxFunction, scalar: &dyn Fn(f64) -> f64) {
    for &t in &[0.1, 0.7, 2.5] {
        for &x in &[-3.1, -0.4, 0.0, 0.25, 1.9] {
            let p = f.prox(t, &v(&[x]))[0];
            let b = brute_prox_1d(scalar, t, x);
            assert!((p - b).abs() < 1e-6, "t={t} x={x}: prox {p} brute {b}");
        }
    }
}

#[test]
fn scalar_proxes_match_brute_force() {
    check_against_brute(&L1Norm::new(0.8, 1), &|z: f64| 0.8 * z.abs());
    check_against_brute(&L2Norm { weight: 1.3 }, &|z: f64| 1.3 * z.abs());
    check_against_brute(&SquaredL2 { weight: 2.0 }, &|z: f64| z * z);
    check_against_brute(&Identity, &|z: f64| z);
    check_against_brute(&DistToNonnegOrthant { weight: 0.6 }, &|z: f64| 0.6 * (-z).max(0.0));
    let box_ind = BoxIndicator::uniform(1, -0.5, 1.0);
    check_against_brute(&box_ind, &|z: f64| if (-0.5..=1.0).contains(&z) { 0.0 } else { 1e9 });
    check_against_brute(&huber(0.5, 1), &|z: f64| {
        if z.abs() <= 0.5 {
            z * z
        } else {
            z.abs() - 0.25
        }
    });
}

#[test]
fn max_coord_prox_is_optimal_in_two_dimensions() {
    let t = 0.6;
    let x = v(&[1.0, 0.2]);
    let p = MaxCoord.prox(t, &x);
    let obj = |z: &Vector| MaxCoord.value(z) + (z - &x).norm_squared() / (2.0 * t);
    let base = obj(&p);
    for i in -40..=40 {
        for j in -40..=40 {
            let z = &p + v(&[i as f64, j as f64]) * 0.01;
            assert!(obj(&z) >= base - 1e-12);
        }
    }
}

#[test]
fn block_separable_applies_each_block() {
    let f = BlockSeparable::new(vec![
        (Arc::new(Identity) as Arc<dyn ProxFunction>, 1),
        (Arc::new(DistToNonnegOrthant { weight: 1.0 }), 2),
    ]);
    let p = f.prox(0.5, &v(&[3.0, -2.0, 1.0]));
    assert_abs_diff_eq!(p[0], 2.5, epsilon = 1e-15);
    assert_abs_diff_eq!(p[1], -1.5, epsilon = 1e-15);
    assert_abs_diff_eq!(p[2], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(f.lipschitz().unwrap(), 2f64.sqrt(), epsilon = 1e-15);
    assert_eq!(f.dim(), 3);
}

#[test]
fn quadratically_regularized_prox_matches_brute_force() {
    let f = QuadraticallyRegularized { base: Arc::new(L1Norm::new(1.0, 1)), center: v(&[0.7]), weight: 3.0 };
    check_against_brute(&f, &|z: f64| z.abs() + 1.5 * (z - 0.7).powi(2));
}

#[test]
fn numerical_prox_agrees_with_soft_threshold() {
    let f = NumericalScalar::new(|z| z.abs(), |z| z.signum(), Some(1.0), 1);
    let closed = L1Norm::new(1.0, 1);
    for &x in &[-2.0, -0.3, 0.9, 4.0] {
        let a = f.prox(0.5, &v(&[x]))[0];
        let b = closed.prox(0.5, &v(&[x]))[0];
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(matches!(f.kind(), ProxKind::Numerical { .. }));
}

#[test]
fn numerical_prox_of_log_cosh() {
    let f = NumericalScalar::new(|z: f64| z.cosh().ln(), |z: f64| z.tanh(), Some(1.0), 1);
    check_against_brute(&f, &|z: f64| z.cosh().ln());
}

#[test]
fn envelope_of_absolute_value() {
    let f = L1Norm::new(1.0, 1);
    assert_abs_diff_eq!(envelope_value(&f, 1.0, &v(&[2.0])).unwrap(), 1.5, epsilon = 1e-15);
    assert_abs_diff_eq!(envelope_value(&f, 1.0, &v(&[0.5])).unwrap(), 0.125, epsilon = 1e-15);
    assert_abs_diff_eq!(envelope_gradient(&f, 1.0, &v(&[2.0])).unwrap()[0], 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(envelope_gradient(&f, 1.0, &v(&[0.5])).unwrap()[0], 0.5, epsilon = 1e-15);
}

#[test]
fn envelope_of_box_indicator_is_half_squared_distance() {
    let f = BoxIndicator::uniform(2, 0.0, 1.0);
    let x = v(&[2.0, -1.0]);
    assert_abs_diff_eq!(envelope_value(&f, 0.5, &x).unwrap(), 2.0 / (2.0 * 0.5), epsilon = 1e-14);
}

#[test]
fn envelope_rejects_bad_parameter() {
    let f = L1Norm::new(1.0, 1);
    assert!(matches!(envelope_value(&f, 0.0, &v(&[1.0])), Err(Error::InvalidParameter(_))));
    assert!(matches!(envelope_gradient(&f, -1.0, &v(&[1.0])), Err(Error::InvalidParameter(_))));
}

#[derive(Debug)]
struct BrokenProx;

impl ProxFunction for BrokenProx {
    fn value(&self, x: &Vector) -> f64 {
        if x[0] > 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn prox(&self, _t: f64, x: &Vector) -> Vector {
        -x.abs() - Vector::from_element(x.len(), 1.0)
    }
}

#[test]
fn envelope_reports_prox_outside_domain() {
    assert!(matches!(envelope_value(&BrokenProx, 1.0, &v(&[1.0])), Err(Error::NonConvexBase(_))));
}

#[test]
fn conjugate_of_l1_is_box_indicator() {
    let h = L1Norm::new(1.0, 2);
    assert_abs_diff_eq!(conjugate_value(&h, &v(&[0.5, -0.9])).unwrap(), 0.0, epsilon = 1e-12);
    assert_eq!(conjugate_value(&h, &v(&[1.5, 0.0])), Err(Error::OutsideDualDomain));
    let p = prox_conjugate(&h, 0.3, &v(&[2.0, -0.2]));
    assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(p[1], -0.2, epsilon = 1e-12);
}

#[test]
fn conjugate_of_squared_norm() {
    let h = SquaredL2 { weight: 2.0 };
    let w = v(&[1.0, -3.0]);
    assert_abs_diff_eq!(conjugate_value(&h, &w).unwrap(), w.norm_squared() / 4.0, epsilon = 1e-8);
}

#[test]
fn envelope_prox_matches_direct_minimization() {
    let e = huber(0.4, 1);
    check_against_brute(&e, &|z: f64| if z.abs() <= 0.4 { z * z / 0.8 } else { z.abs() - 0.2 });
}

fn library() -> Vec<Arc<dyn ProxFunction>> {
    vec![
        Arc::new(L1Norm::new(0.7, 3)),
        Arc::new(L2Norm { weight: 1.1 }),
        Arc::new(SquaredL2 { weight: 0.5 }),
        Arc::new(BoxIndicator::uniform(3, -1.0, 0.5)),
        Arc::new(NonnegIndicator),
        Arc::new(MaxCoord),
        Arc::new(DistToNonnegOrthant { weight: 2.0 }),
        Arc::new(huber(0.3, 3)),
        Arc::new(Scaled::new(Arc::new(L2Norm { weight: 1.0 }), 0.25)),
    ]
}

proptest! {
    #[test]
    fn prox_is_firmly_nonexpansive(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        b in prop::collection::vec(-5.0f64..5.0, 3),
        t in 0.05f64..4.0,
    ) {
        let (x, y) = (v(&a), v(&b));
        for f in library() {
            let (px, py) = (f.prox(t, &x), f.prox(t, &y));
            let lhs = (&px - &py).norm_squared();
            let rhs = (&px - &py).dot(&(&x - &y));
            prop_assert!(lhs <= rhs + 1e-10, "{:?}: {} > {}", f, lhs, rhs);
        }
    }

    #[test]
    fn moreau_decomposition_holds(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        t in 0.05f64..4.0,
    ) {
        let x = v(&a);
        for f in library() {
            let recomposed = f.prox(t, &x) + prox_conjugate(f.as_ref(), 1.0 / t, &(&x / t)) * t;
            prop_assert!((&recomposed - &x).norm() < 1e-9 * (1.0 + x.norm()));
        }
    }

    #[test]
    fn envelope_sits_below_function(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        nu in 0.05f64..4.0,
    ) {
        let x = v(&a);
        for f in library() {
            let fx = f.value(&x);
            let e = envelope_value(f.as_ref(), nu, &x).unwrap();
            prop_assert!(e <= fx + 1e-12);
        }
    }

    #[test]
    fn prox_optimality_against_perturbations(
        a in prop::collection::vec(-5.0f64..5.0, 3),
        d in prop::collection::vec(-1.0f64..1.0, 3),
        t in 0.05f64..4.0,
    ) {
        let x = v(&a);
        let dir = v(&d) * 0.1;
        for f in library() {
            let p = f.prox(t, &x);
            let obj = |z: &Vector| f.value(z) + (z - &x).norm_squared() / (2.0 * t);
            prop_assert!(obj(&p) <= obj(&(&p + &dir)) + 1e-10);
        }
    }
}
