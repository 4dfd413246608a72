use mcusum::detectors::logspace::{log_add_exp, log_sum_exp};
use mcusum::detectors::{
    run_on_increments, CusumState, MixturePi, SbarMixture, ShatMixture, StoppingRule, SumTopL, TopLForm, TopLGlr,
    XieSiegmund,
};
use mcusum::model::{ClassKind, SubsetClass, WeightSpec};
use mcusum::renewal::{gaussian_constants, ThresholdSpec};
use mcusum::windows::{full_history_max, RegenerationTracker, WindowRule};
use proptest::prelude::*;

fn paths(k: usize, max_len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, k), 1..max_len)
}

fn sized_paths() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..=5).prop_flat_map(|k| (Just(k), paths(k, 120)))
}

proptest! {
    #[test]
    fn cusum_recursion_invariant(llrs in prop::collection::vec(-5.0f64..5.0, 1..300)) {
        let mut s = CusumState::new();
        let mut z = 0.0;
        let mut min_z = 0.0f64;
        for l in llrs {
            s.step(l);
            z += l;
            min_z = min_z.min(z);
            prop_assert_eq!(s.y_nonneg, s.y_signed.max(0.0));
            prop_assert!(s.y_nonneg >= 0.0);
            // Y_t = Z_t − min_{s ≤ t} Z_s
            prop_assert!((s.y_nonneg - (z - min_z)).abs() < 1e-9);
        }
    }

    #[test]
    fn log_add_exp_is_symmetric_and_bounded(a in -700.0f64..700.0, b in -700.0f64..700.0) {
        let s = log_add_exp(a, b);
        prop_assert_eq!(s, log_add_exp(b, a));
        prop_assert!(s >= a.max(b) && s <= a.max(b) + 2f64.ln() + 1e-12);
        prop_assert!((log_sum_exp([a, b]) - s).abs() < 1e-12);
    }

    #[test]
    fn class_weights_sum_to_one(k in 1usize..=8, l in 1usize..=8, p in 0.05f64..5.0, exact in any::<bool>()) {
        let l = l.min(k);
        let class = if exact {
            SubsetClass::new(k, ClassKind::Exactly(l), WeightSpec::Power(p)).unwrap()
        } else {
            SubsetClass::at_most(k, l, p).unwrap()
        };
        let w = class.weights().unwrap();
        prop_assert_eq!(w.len() as u128, class.cardinality());
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn threshold_spec_weights_sum_to_one(thetas in prop::collection::vec(0.2f64..3.0, 1..8)) {
        let consts = gaussian_constants(&thetas).unwrap();
        for spec in ThresholdSpec::WEIGHTED {
            let p = spec.weights(&consts).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn windowed_max_equals_full_history((k, incs) in sized_paths()) {
        let reference = full_history_max(&incs, |d| d.iter().map(|x| x.max(0.0)).sum::<f64>() + d.iter().sum::<f64>());
        let mut tr = RegenerationTracker::new(k, WindowRule::Regeneration);
        for (inc, want) in incs.iter().zip(&reference) {
            tr.push_increments(inc);
            let got = mcusum::windows::windowed_max(&tr, |d| d.iter().map(|x| x.max(0.0)).sum::<f64>() + d.iter().sum::<f64>());
            prop_assert!((got - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn window_length_tracks_anchor((k, incs) in sized_paths(), sigma in any::<bool>()) {
        let rule = if sigma { WindowRule::Sigma } else { WindowRule::Regeneration };
        let mut tr = RegenerationTracker::new(k, rule);
        for inc in &incs {
            tr.push_increments(inc);
            prop_assert_eq!(tr.window_len() as u64, tr.time() - tr.anchor() + 1);
        }
    }

    #[test]
    fn stopped_verdicts_reach_the_threshold((k, incs) in sized_paths(), b in 0.5f64..8.0, pi in 0.05f64..0.95) {
        let p = pi / (1.0 - pi);
        let class = SubsetClass::at_most(k, k, p).unwrap();
        let rules: Vec<Box<dyn StoppingRule>> = vec![
            Box::new(TopLGlr::new(k, TopLForm::AtMost { l: k, p }, b, WindowRule::Regeneration).unwrap()),
            Box::new(SbarMixture::factorized(&class, b, WindowRule::Regeneration).unwrap()),
            Box::new(ShatMixture::new(k, pi, b, WindowRule::Sigma).unwrap()),
            Box::new(XieSiegmund::new(k, pi, b, WindowRule::Regeneration).unwrap()),
            Box::new(SumTopL::new(k, k, b).unwrap()),
            Box::new(MixturePi::new(k, pi, b).unwrap()),
        ];
        for mut rule in rules {
            let v = run_on_increments(rule.as_mut(), incs.iter().map(Vec::as_slice)).unwrap();
            prop_assert!(v.stopped != v.censored);
            if v.stopped {
                prop_assert!(v.statistic >= b, "{}: {} < {b}", rule.label(), v.statistic);
                prop_assert!(v.time as usize <= incs.len());
            } else {
                prop_assert_eq!(v.time as usize, incs.len());
            }
        }
    }

    #[test]
    fn glr_statistic_is_monotone_in_increments((k, incs) in sized_paths(), bump in 0.0f64..2.0) {
        // raising every increment can only raise the statistic
        let raised: Vec<Vec<f64>> = incs.iter().map(|x| x.iter().map(|v| v + bump).collect()).collect();
        let mut a = TopLGlr::new(k, TopLForm::Exactly(k), f64::MAX, WindowRule::Regeneration).unwrap();
        let mut b = a.clone();
        for (x, y) in incs.iter().zip(&raised) {
            let sa = a.update(x);
            let sb = b.update(y);
            prop_assert!(sb >= sa - 1e-9);
        }
    }
}
