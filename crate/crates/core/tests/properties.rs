use proptest::prelude::*;

use speccalc::counterexamples::{tail_evaluate, EventuallyConstantDiagonal};
use speccalc::evaluator::{
    calibrate_profile, check_scaling_uniqueness, measure_pair, monotone_truncations, Evaluator, TraceFormEvaluator,
    TraceProfile, Uniqueness,
};
use speccalc::function::Interval;
use speccalc::growth::check_reparam_identity;
use speccalc::majorization::{convex_trace_monotonicity_check, majorized_pair, preceq};
use speccalc::{generalized_inverse, DiscreteSpectrum, FunctionSpec};

fn atoms(signed: bool, max_len: usize) -> impl Strategy<Value = Vec<(f64, u64)>> {
    let value = if signed {
        prop_oneof![(-40i32..=40).prop_map(|k| k as f64 / 4.0), -10.0f64..10.0].boxed()
    } else {
        prop_oneof![(0i32..=40).prop_map(|k| k as f64 / 4.0), 0.0f64..10.0].boxed()
    };
    prop::collection::vec((value, 1u64..=4), 0..max_len)
}

fn spectrum(signed: bool) -> impl Strategy<Value = DiscreteSpectrum> {
    atoms(signed, 12).prop_map(|a| DiscreteSpectrum::from_unsorted(a, "").unwrap())
}

fn monotone_unbounded() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        prop::sample::select(vec![0.5, 1.0, 2.0, 3.0]).prop_map(FunctionSpec::power),
        (0.1f64..2.0).prop_map(FunctionSpec::exp_scale),
        prop::collection::vec((0.1f64..3.0, 0.0f64..3.0), 1..5).prop_map(|steps| {
            let (mut t, mut v) = (0.0, 0.0);
            let mut knots = vec![(0.0, 0.0)];
            for (dt, dv) in steps {
                t += dt;
                v += dv;
                knots.push((t, v));
            }
            // positive end slope keeps the function unbounded
            knots.push((t + 1.0, v + 1.0));
            FunctionSpec::PiecewiseLinear { knots }
        }),
    ]
}

fn monotone_profile() -> impl Strategy<Value = FunctionSpec> {
    prop_oneof![
        prop::sample::select(vec![0.5, 1.0, 1.5, 2.0, 3.0]).prop_map(FunctionSpec::power),
        Just(FunctionSpec::compose(FunctionSpec::LogPos, FunctionSpec::affine(1.0, 1.0))),
        (0.05f64..0.5).prop_map(|c| FunctionSpec::compose(FunctionSpec::affine(1.0, -1.0), FunctionSpec::exp_scale(c))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn counting_is_monotone(s in spectrum(true), a in 0.0f64..12.0, b in 0.0f64..12.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(s.counting(lo) <= s.counting(hi));
    }

    #[test]
    fn counting_is_additive_on_direct_sums(s1 in spectrum(true), s2 in spectrum(true), level in 0.0f64..12.0) {
        let sum = s1.direct_sum(&s2);
        prop_assert_eq!(sum.counting(level), s1.counting(level) + s2.counting(level));
    }

    #[test]
    fn trace_is_linear_on_direct_sums(s1 in spectrum(true), s2 in spectrum(true)) {
        let lhs = s1.direct_sum(&s2).trace();
        let rhs = s1.trace() + s2.trace();
        let scale = s1.expand().iter().chain(s2.expand().iter()).map(|v| v.abs()).sum::<f64>().max(1.0);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale, "{} vs {}", lhs, rhs);
    }

    #[test]
    fn reparametrization_is_exact(s in spectrum(false), f in monotone_unbounded(), level in 0.0f64..50.0) {
        let image = s.apply_calculus(&f).unwrap();
        let inv = generalized_inverse(&f, level).unwrap();
        let rhs = if f.eval(0.0).unwrap() > level { 0 } else { s.counting(inv) };
        prop_assert_eq!(image.counting(level), rhs);
        let report = check_reparam_identity(&s, &f, &[level]).unwrap();
        prop_assert!(report.holds());
    }

    #[test]
    fn calculus_preserves_multiplicity(s in spectrum(false), f in monotone_unbounded()) {
        prop_assert_eq!(s.apply_calculus(&f).unwrap().total_multiplicity(), s.total_multiplicity());
    }

    #[test]
    fn tensor_multiplicity_matches_pair_count(s1 in spectrum(false), s2 in spectrum(false), level in 0.5f64..60.0) {
        let product = s1.tensor_product(&s2, level).unwrap();
        let mut pairs = 0u64;
        for a in s1.expand() {
            for b in s2.expand() {
                if a * b <= level {
                    pairs += 1;
                }
            }
        }
        prop_assert_eq!(product.total_multiplicity(), pairs);
    }

    #[test]
    fn cutoff_limit_is_the_trace(s in spectrum(true)) {
        let first = s.max_abs().max(1.0);
        let limit = s
            .cutoff_trace_limit(&FunctionSpec::Identity, &[first, 2.0 * first, 4.0 * first], 1e-12)
            .unwrap();
        let v = limit.value().expect("converges on finite spectra");
        prop_assert!((v - s.trace()).abs() <= 1e-12 * first * s.total_multiplicity().max(1) as f64);
    }

    #[test]
    fn rigidity_round_trip(h in monotone_profile(), c in 0.5f64..5.0, picks in prop::collection::vec((0usize..40, 1u64..4), 1..10)) {
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 0.5).collect();
        let hidden = TraceFormEvaluator::from_spec(h, c).unwrap();
        let table = calibrate_profile(&hidden, &grid).unwrap();
        let calibrated = TraceFormEvaluator::new(table, 1.0).unwrap();
        let s = DiscreteSpectrum::from_unsorted(picks.iter().map(|&(i, m)| (grid[i], m)).collect(), "").unwrap();
        let (a, b) = (hidden.evaluate(&s).unwrap(), calibrated.evaluate(&s).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()));
    }

    #[test]
    fn calibrated_tables_are_nondecreasing(h in monotone_profile(), c in 0.5f64..5.0) {
        let hidden = TraceFormEvaluator::from_spec(h, c).unwrap();
        let grid: Vec<f64> = (1..=30).map(f64::from).collect();
        match calibrate_profile(&hidden, &grid).unwrap() {
            TraceProfile::Table(knots) => prop_assert!(knots.windows(2).all(|w| w[0].1 <= w[1].1)),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn scaling_is_recovered(h in monotone_profile(), c in 0.5f64..5.0, a in prop::sample::select(vec![0.5, 1.0, 2.0, 10.0])) {
        let grid: Vec<f64> = (1..=20).map(f64::from).collect();
        let scaled: Vec<(f64, f64)> = std::iter::once((0.0, 0.0))
            .chain(grid.iter().map(|&g| (g, a * h.eval(g).unwrap())))
            .collect();
        let u = check_scaling_uniqueness(&TraceProfile::Spec(h), c, &TraceProfile::Table(scaled), c / a, &grid, 1e-9).unwrap();
        match u {
            Uniqueness::Scalar { a: found } => prop_assert!((found - a).abs() <= 1e-9 * a),
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn truncations_increase_to_the_value(h in monotone_profile(), s in spectrum(false)) {
        let e = TraceFormEvaluator::from_spec(h, 1.0).unwrap();
        let seq = monotone_truncations(&e, &s).unwrap();
        prop_assert!(seq.windows(2).all(|w| w[0].1 <= w[1].1 * (1.0 + 1e-12)));
        if let Some(&(_, last)) = seq.last() {
            let full = e.evaluate(&s).unwrap();
            prop_assert!((last - full).abs() <= 1e-12 * full.abs().max(1.0));
        }
    }

    #[test]
    fn evaluator_measure_is_absolutely_continuous(
        h in monotone_profile(),
        s in spectrum(false),
        bounds in prop::collection::vec((0.0f64..10.0, 0.0f64..2.0), 1..4),
    ) {
        let e = TraceFormEvaluator::from_spec(h, 1.0).unwrap();
        let b: Vec<Interval> = bounds.iter().map(|&(lo, w)| Interval::closed(lo, lo + w).unwrap()).collect();
        let m = measure_pair(&e, &s, &b).unwrap();
        if m.nu == 0.0 {
            prop_assert_eq!(m.mu, 0.0);
        }
    }

    #[test]
    fn tail_ignores_finite_rewrites(prefix in prop::collection::vec(-5.0f64..5.0, 0..10), tail in -3.0f64..3.0, rewrite in prop::collection::vec(-5.0f64..5.0, 0..10)) {
        let d = EventuallyConstantDiagonal::new(prefix, tail);
        let e = EventuallyConstantDiagonal::new(rewrite, tail);
        prop_assert_eq!(tail_evaluate(&d), tail_evaluate(&e));
    }

    #[test]
    fn preceq_is_reflexive_and_relabeling_invariant(a in atoms(true, 10), seed in any::<u64>()) {
        let x = DiscreteSpectrum::from_unsorted(a.clone(), "").unwrap();
        prop_assert!(preceq(&x, &x, None).holds);
        let mut shuffled = a;
        let len = shuffled.len();
        if len > 1 {
            shuffled.rotate_left((seed % len as u64) as usize);
        }
        let y = DiscreteSpectrum::from_unsorted(shuffled, "").unwrap();
        prop_assert_eq!(preceq(&x, &y, None).holds, true);
        prop_assert_eq!(preceq(&y, &x, None).holds, true);
    }

    #[test]
    fn preceq_is_transitive(x in spectrum(true), y in spectrum(true), z in spectrum(true)) {
        if preceq(&x, &y, None).holds && preceq(&y, &z, None).holds {
            prop_assert!(preceq(&x, &z, None).holds);
        }
    }

    #[test]
    fn zero_padding_is_sound(x in spectrum(false), y in spectrum(false), zx in 0u64..4, zy in 0u64..4) {
        let pad = |s: &DiscreteSpectrum, z: u64| {
            let mut a = s.atoms().to_vec();
            if z > 0 {
                a.push((0.0, z));
            }
            DiscreteSpectrum::from_unsorted(a, "").unwrap()
        };
        prop_assert_eq!(preceq(&pad(&x, zx), &pad(&y, zy), None).holds, preceq(&x, &y, None).holds);
    }

    #[test]
    fn convex_traces_respect_majorization(seed in any::<u64>(), beta in prop::sample::select(vec![1.0, 2.0, 3.0]), hinge in 0.0f64..8.0) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = majorized_pair(&mut rng);
        for phi in [FunctionSpec::power(beta), FunctionSpec::hinge(hinge)] {
            let r = convex_trace_monotonicity_check(&x, &y, &phi).unwrap();
            prop_assert!(r.holds, "{:?}", r);
        }
    }
}
