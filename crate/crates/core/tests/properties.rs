mod common;

use common::{random_dist, rng, six_specs};
use proptest::prelude::*;
use sanov_dual::alpha::alpha_n;
use sanov_dual::dp::rho_n_dense;
use sanov_dual::ext::ext_sub;
use sanov_dual::mc::{wilson, TailEstimate, Z95};
use sanov_dual::rho::{rho_oce, OceFn};
use sanov_dual::space::{compose, disintegrate, empirical_measure};
use sanov_dual::{AlphaSpec, Dist, ExtReal, ProductDist, RealFieldN};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() }
}

fn f3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 3)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn rho_is_monotone(seed in any::<u64>(), f in f3(), bump in prop::collection::vec(0.0..2.0f64, 3)) {
        let mut r = rng(seed);
        let g: Vec<f64> = f.iter().zip(&bump).map(|(a, b)| a + b).collect();
        for spec in six_specs(&mut r, 3) {
            prop_assert!(spec.rho(&f).value() <= spec.rho(&g).value() + 1e-9, "{}", spec.name());
        }
        let mu = random_dist(&mut r, 3);
        for phi in [OceFn::ExpMinusOne, OceFn::StopLoss] {
            prop_assert!(rho_oce(&f, &mu, &phi).value() <= rho_oce(&g, &mu, &phi).value() + 1e-7);
        }
    }

    #[test]
    fn rho_is_translation_additive(seed in any::<u64>(), f in f3(), c in -5.0..5.0f64) {
        let mut r = rng(seed);
        let g: Vec<f64> = f.iter().map(|a| a + c).collect();
        for spec in six_specs(&mut r, 3) {
            let (a, b) = (spec.rho(&f).value(), spec.rho(&g).value());
            prop_assert!((b - a - c).abs() <= 1e-9, "{}: {a} {b}", spec.name());
        }
    }

    #[test]
    fn rho_is_convex(seed in any::<u64>(), f in f3(), g in f3(), t in 0.0..1.0f64) {
        let mut r = rng(seed);
        let h: Vec<f64> = f.iter().zip(&g).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        for spec in six_specs(&mut r, 3) {
            let lhs = spec.rho(&h).value();
            let rhs = t * spec.rho(&f).value() + (1.0 - t) * spec.rho(&g).value();
            prop_assert!(lhs <= rhs + 1e-8, "{}: {lhs} > {rhs}", spec.name());
        }
    }

    #[test]
    fn rho_approximates_from_above_at_minus_infinity(seed in any::<u64>(), f in f3(), hole in 0usize..3) {
        let mut r = rng(seed);
        let mut f = f;
        f[hole] = f64::NEG_INFINITY;
        for spec in six_specs(&mut r, 3) {
            let exact = spec.rho(&f).value();
            let mut prev = f64::INFINITY;
            let mut at_100 = f64::INFINITY;
            for k in [1.0, 10.0, 100.0, 1000.0] {
                let cut: Vec<f64> = f.iter().map(|v| v.max(-k)).collect();
                let v = spec.rho(&cut).value();
                prop_assert!(v >= exact - 1e-9 && v <= prev + 1e-9, "{}", spec.name());
                if k == 100.0 {
                    at_100 = v;
                }
                prev = v;
            }
            if exact.is_finite() {
                prop_assert!((prev - exact).abs() <= 1e-6, "{}: {prev} vs {exact}", spec.name());
            } else {
                // the cut values must keep falling without bound
                prop_assert!(prev < at_100 - 1.0, "{}: {prev} vs {at_100}", spec.name());
            }
        }
    }

    #[test]
    fn weak_duality(seed in any::<u64>(), f in f3()) {
        let mut r = rng(seed);
        for spec in six_specs(&mut r, 3) {
            let v = spec.rho(&f).value();
            for _ in 0..1000 {
                let nu = random_dist(&mut r, 3);
                let lower = ext_sub(nu.integrate(&f), spec.alpha(&nu).value());
                prop_assert!(lower <= v + 1e-9, "{}: {lower} > {v}", spec.name());
            }
        }
    }

    #[test]
    fn alpha_is_convex(seed in any::<u64>(), t in 0.0..1.0f64) {
        let mut r = rng(seed);
        for spec in six_specs(&mut r, 3) {
            let (a, b) = (random_dist(&mut r, 3), random_dist(&mut r, 3));
            let mix = Dist::mixture(&[&a, &b], &[t, 1.0 - t]).unwrap();
            let lhs = spec.alpha(&mix).value();
            let rhs = sanov_dual::ext::ext_add(t * spec.alpha(&a).value(), (1.0 - t) * spec.alpha(&b).value());
            prop_assert!(lhs <= rhs + 1e-8, "{}: {lhs} > {rhs}", spec.name());
        }
    }

    #[test]
    fn alpha_jensen_for_mixtures(seed in any::<u64>(), k in 2usize..6) {
        let mut r = rng(seed);
        for spec in six_specs(&mut r, 3) {
            let comps: Vec<Dist> = (0..k).map(|_| random_dist(&mut r, 3)).collect();
            let w = random_dist(&mut r, k);
            let refs: Vec<&Dist> = comps.iter().collect();
            let mean = Dist::mixture(&refs, w.weights()).unwrap();
            let avg = comps.iter().zip(w.weights()).fold(0.0, |acc, (c, wi)| {
                sanov_dual::ext::ext_add(acc, sanov_dual::ext::weight_mul(*wi, spec.alpha(c).value()))
            });
            prop_assert!(spec.alpha(&mean).value() <= avg + 1e-8, "{}", spec.name());
        }
    }

    #[test]
    fn rho_n_monotone_and_translation(seed in any::<u64>(), c in -3.0..3.0f64) {
        let mut r = rng(seed);
        let vals = common::random_f(&mut r, 8, 2.0);
        let bumped: Vec<f64> = vals.iter().map(|v| v + 0.5 * (1.0 + v.sin())).collect();
        let shifted: Vec<f64> = vals.iter().map(|v| v + c).collect();
        let f = RealFieldN::dense(3, 2, vals).unwrap();
        let g = RealFieldN::dense(3, 2, bumped).unwrap();
        let h = RealFieldN::dense(3, 2, shifted).unwrap();
        for spec in six_specs(&mut r, 2) {
            let a = rho_n_dense(&f, &spec).unwrap().0.value();
            prop_assert!(a <= rho_n_dense(&g, &spec).unwrap().0.value() + 1e-9);
            prop_assert!((rho_n_dense(&h, &spec).unwrap().0.value() - a - c).abs() <= 1e-8, "{}", spec.name());
        }
    }

    #[test]
    fn alpha_n_iid_is_additive(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        for spec in six_specs(&mut r, 2) {
            let nu = match &spec {
                AlphaSpec::Robust { set } | AlphaSpec::SetIndicator { set } => set[0].clone(),
                _ => random_dist(&mut r, 2),
            };
            let a = spec.alpha(&nu).value();
            let an = alpha_n(&ProductDist::iid(&nu, n).unwrap(), &spec).value();
            prop_assert!((an - n as f64 * a).abs() <= 1e-8 * (1.0 + a.abs()), "{}", spec.name());
        }
    }

    #[test]
    fn disintegration_round_trip(seed in any::<u64>(), n in 1usize..5, m in 2usize..4) {
        let mut r = rng(seed);
        let w = random_dist(&mut r, m.pow(n as u32));
        let nu = ProductDist::new(n, m, w.weights().to_vec()).unwrap();
        let (first, kernels) = disintegrate(&nu);
        let back = compose(&first, &kernels).unwrap();
        for (a, b) in back.tensor().iter().zip(nu.tensor()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn empirical_measure_permutation_invariant(x in prop::collection::vec(0usize..4, 1..12)) {
        let mut y = x.clone();
        y.reverse();
        y.rotate_left(x.len() / 2);
        prop_assert_eq!(empirical_measure(&x, 4).unwrap(), empirical_measure(&y, 4).unwrap());
    }

    #[test]
    fn symmetric_fields_expand_to_permutation_invariant(seed in any::<u64>(), n in 1usize..5) {
        let mut r = rng(seed);
        let coeffs = common::random_f(&mut r, 3, 1.0);
        let f = RealFieldN::from_empirical_functional(n, 3, |nu| coeffs.iter().zip(nu).map(|(a, b)| a * b * b).sum()).unwrap();
        let dense = f.to_dense().unwrap();
        for idx in 0..3usize.pow(n as u32) {
            let x = sanov_dual::space::decode(idx, 3, n);
            let mut y = x.clone();
            y.reverse();
            prop_assert_eq!(dense.at(&x), dense.at(&y));
        }
    }

    #[test]
    fn wilson_interval_contains_estimate(reps in 1000usize..100_000, frac in 0.0..=1.0f64) {
        let hits = ((reps as f64) * frac) as usize;
        let est = TailEstimate::from_hits(10, 1.0, reps, hits);
        prop_assert!(est.hits <= est.reps);
        prop_assert!(est.lo <= est.p_hat && est.p_hat <= est.hi);
        prop_assert_eq!(wilson(hits, reps, Z95), (est.lo, est.hi));
    }

    #[test]
    fn ext_real_convention(a in -1e6..1e6f64) {
        let inf = ExtReal::new(f64::INFINITY);
        prop_assert!((inf - inf).is_neg_inf());
        prop_assert!((ExtReal::new(a) + ExtReal::new(f64::NEG_INFINITY)).is_neg_inf());
        prop_assert_eq!(sanov_dual::ext::weight_mul(0.0, f64::INFINITY), 0.0);
    }
}
