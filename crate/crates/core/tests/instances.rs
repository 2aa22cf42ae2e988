use std::sync::Arc;

use proptest::prelude::*;
use proxlin::oracle::objective_value;
use proxlin::par::{map_indexed, map_slice, Execution};
use proxlin::problems::{probe_constants, zoo, InstanceSpec};
use proxlin::rng::{gaussian_vector, seeded};
use proxlin::smooth::{finite_diff_jacobian_check, GreyBox, PhaseRetrievalMap, SmoothMap};
use proxlin::{CompositeProblem, Matrix, Oracle, OracleCounters, Vector};

fn specs() -> Vec<InstanceSpec> {
    vec![
        InstanceSpec::AdditiveComposite { d: 5 },
        InstanceSpec::NlsBox { d: 4, m: 6 },
        InstanceSpec::PhaseRetrieval { d: 5, m: 10 },
        InstanceSpec::ExactPenalty { d: 4, m: 2, lambda: 2.0 },
        InstanceSpec::Lad { d: 3, m: 12 },
        InstanceSpec::Pathology,
    ]
}

#[test]
fn zoo_covers_every_generator_once() {
    let names: Vec<&str> = zoo(0).unwrap().iter().map(|i| i.name()).collect();
    let expected: Vec<&str> = specs().iter().map(|s| s.name()).collect();
    assert_eq!(names, expected);
}

#[test]
fn instances_are_reproducible_from_the_seed() {
    for spec in specs() {
        let (a, b) = (spec.build(17).unwrap(), spec.build(17).unwrap());
        assert_eq!(a.start, b.start, "{}", spec.name());
        assert_eq!(a.test_point, b.test_point, "{}", spec.name());
        assert_eq!(a.problem.c().eval(&a.test_point), b.problem.c().eval(&b.test_point));
        let other = spec.build(18).unwrap();
        if spec != InstanceSpec::Pathology {
            assert_ne!(a.test_point, other.test_point, "{}", spec.name());
        }
    }
}

#[test]
fn zero_dimensions_are_rejected() {
    assert!(InstanceSpec::NlsBox { d: 0, m: 3 }.build(0).is_err());
    assert!(InstanceSpec::Lad { d: 3, m: 0 }.build(0).is_err());
    assert!(InstanceSpec::AdditiveComposite { d: 0 }.build(0).is_err());
}

#[test]
fn understated_beta_is_caught_by_the_probe() {
    let inst = InstanceSpec::PhaseRetrieval { d: 5, m: 10 }.build(1).unwrap();
    let beta = inst.problem.beta();
    assert!(probe_constants(&inst, 500, 1.0, 3).holds(1e-9));
    let wrong = inst.with_beta(0.1 * beta).unwrap();
    assert!(probe_constants(&wrong, 500, 1.0, 3).beta_ratio > 1.5);
}

#[test]
fn oracle_counts_each_call_once() {
    let inst = InstanceSpec::NlsBox { d: 4, m: 6 }.build(2).unwrap();
    let o = Oracle::new(&inst.problem);
    let x = inst.start.clone();
    let cx = o.c(&x).unwrap();
    o.jvp(&x, &Vector::from_element(4, 1.0)).unwrap();
    o.jvp(&x, &Vector::from_element(4, 2.0)).unwrap();
    o.vjp(&x, &cx).unwrap();
    o.prox_h(0.5, &cx).unwrap();
    o.prox_g(0.5, &x).unwrap();
    o.g_value(&x).unwrap();
    o.h_value(&cx).unwrap();
    let expected = OracleCounters { n_c_eval: 1, n_jvp: 2, n_vjp: 1, n_prox_h: 1, n_prox_g: 1 };
    assert_eq!(o.counters(), expected);
    assert_eq!(o.counters().total(), 6);
    o.objective(&x).unwrap();
    let after = o.counters();
    assert!(after.dominates(&expected));
    assert_eq!(after - expected, OracleCounters { n_c_eval: 1, ..Default::default() });
}

#[test]
fn objective_outside_the_domain_skips_c() {
    let inst = InstanceSpec::NlsBox { d: 4, m: 6 }.build(2).unwrap();
    let o = Oracle::new(&inst.problem);
    let far = Vector::from_element(4, 1e6);
    assert_eq!(o.objective(&far).unwrap(), f64::INFINITY);
    assert_eq!(o.counters().n_c_eval, 0);
}

#[test]
fn dimension_mismatch_is_an_error() {
    let inst = InstanceSpec::Lad { d: 3, m: 12 }.build(0).unwrap();
    let o = Oracle::new(&inst.problem);
    assert!(o.c(&Vector::zeros(4)).is_err());
}

#[test]
fn grey_box_counts_pass_through() {
    let mut rng = seeded(4);
    let a = Matrix::from_fn(5, 3, |i, j| (i as f64 - j as f64) * 0.3);
    let inner: Arc<dyn SmoothMap> = Arc::new(PhaseRetrievalMap::new(a, gaussian_vector(&mut rng, 5), None));
    let grey = Arc::new(GreyBox::new(inner.clone()));
    let x = gaussian_vector(&mut rng, 3);
    assert!(finite_diff_jacobian_check(grey.as_ref(), &x, 3, 1) < 1e-6);
    let counts = grey.counts();
    assert_eq!((counts.eval, counts.jvp, counts.vjp), (6, 3, 3));
    let p = CompositeProblem::new(
        Arc::new(proxlin::prox::Zero),
        Arc::new(proxlin::prox::L1Norm::new(1.0, 5)),
        grey.clone() as Arc<dyn SmoothMap>,
    )
    .unwrap();
    assert_eq!(objective_value(&p, &x).unwrap(), inner.eval(&x).abs().sum());
    assert_eq!(grey.counts().eval, 7);
}

#[test]
fn sequential_fallback_matches_the_parallel_map() {
    let items: Vec<u64> = (0..37).collect();
    let f = |&k: &u64| (k * k) as f64 / 7.0;
    assert_eq!(map_slice(Execution::Sequential, &items, f), map_slice(Execution::Parallel, &items, f));
    assert!(map_indexed(Execution::Parallel, 0, |i| i).is_empty());
    assert_eq!(Execution::default().is_parallel(), cfg!(feature = "parallel"));
    assert!(!Execution::Sequential.is_parallel());
}

#[test]
fn parallel_sweeps_reproduce_sequential_objectives() {
    let insts = zoo(5).unwrap();
    let value = |i: &proxlin::problems::ProblemInstance| objective_value(&i.problem, &i.test_point).unwrap();
    let seq: Vec<f64> = map_slice(Execution::Sequential, &insts, value);
    let par: Vec<f64> = map_slice(Execution::Parallel, &insts, value);
    assert_eq!(seq, par);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn declared_constants_survive_probes(seed in 0u64..1000) {
        for inst in zoo(seed).unwrap() {
            let probe = probe_constants(&inst, 200, 1.0, seed);
            prop_assert!(probe.holds(1e-9), "{}: {:?}", inst.name(), probe);
        }
    }

    #[test]
    fn jacobian_actions_match_central_differences(seed in 0u64..1000) {
        let mut rng = seeded(seed);
        for inst in zoo(seed).unwrap() {
            let x = inst.sample_point(&mut rng, 1.0);
            let e = finite_diff_jacobian_check(inst.problem.c().as_ref(), &x, 3, seed);
            prop_assert!(e < 1e-6, "{}: {e:e}", inst.name());
        }
    }

    #[test]
    fn references_bound_the_objective_from_below(seed in 0u64..1000) {
        let mut rng = seeded(seed ^ 0xabc);
        for inst in zoo(seed).unwrap() {
            let Some(r) = &inst.reference else { continue };
            if let Some(x) = &r.minimizer {
                let f = objective_value(&inst.problem, x).unwrap();
                prop_assert!((f - r.inf_value).abs() <= 1e-9 * (1.0 + f.abs()), "{}", inst.name());
            }
            for _ in 0..10 {
                let x = inst.sample_point(&mut rng, 2.0);
                let f = objective_value(&inst.problem, &x).unwrap();
                prop_assert!(f >= r.inf_value - 1e-9 * (1.0 + f.abs()), "{}: {f} < {}", inst.name(), r.inf_value);
            }
        }
    }

    #[test]
    fn sampled_points_stay_in_the_domain(seed in 0u64..1000, radius in 0.01f64..5.0) {
        let mut rng = seeded(seed);
        for inst in zoo(seed).unwrap() {
            let x = inst.sample_point(&mut rng, radius);
            prop_assert!(inst.problem.g().value(&x).is_finite(), "{}", inst.name());
        }
    }

    #[test]
    fn map_preserves_index_order(n in 0usize..200) {
        let out = map_indexed(Execution::Parallel, n, |i| 3 * i + 1);
        prop_assert_eq!(out, (0..n).map(|i| 3 * i + 1).collect::<Vec<_>>());
    }
}
