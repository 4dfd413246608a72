mod common;

use common::rng;
use mcusum::detectors::{OneSidedSprt, OracleCusum, StoppingRule, SumTopL, TopLForm, TopLGlr};
use mcusum::model::{CorrelatedGaussian, IndependentGaussian, Scenario, SensorModel, Subset};
use mcusum::montecarlo::{
    calibrate_threshold, estimate_arl, estimate_delay, estimate_worst_delay, simulate, CalibrationConfig, RunConfig,
};
use mcusum::windows::{RegenerationTracker, WindowRule};
use rand_distr::{Distribution, StandardNormal};

fn unit_model(k: usize) -> IndependentGaussian {
    IndependentGaussian::homogeneous(k, 1.0).unwrap()
}

#[test]
fn later_change_is_no_worse_than_immediate() {
    let model = unit_model(4);
    let a = Subset::first(2).unwrap();
    let rules: Vec<Box<dyn StoppingRule>> = vec![
        Box::new(OracleCusum::new(a, 5.0).unwrap()),
        Box::new(TopLGlr::new(4, TopLForm::AtMost { l: 4, p: 1.0 }, 6.0, WindowRule::Regeneration).unwrap()),
        Box::new(SumTopL::new(4, 2, 6.0).unwrap()),
    ];
    for rule in rules {
        let cfg = RunConfig::new(4000, 10_000, 3).workers(1);
        let d0 = estimate_worst_delay(rule.as_ref(), &model, a, &cfg).unwrap();
        let d5 = estimate_delay(rule.as_ref(), &model, Scenario::change_at(5, a).unwrap(), &cfg).unwrap();
        let se = d0.standard_error.hypot(d5.standard_error);
        assert!(d5.mean <= d0.mean + 3.0 * se, "{}: {} vs {}", rule.label(), d5.mean, d0.mean);
    }
}

#[test]
fn standard_errors_cover_the_mean() {
    let model = unit_model(1);
    let rule = OracleCusum::new(Subset::first(1).unwrap(), 2.0).unwrap();
    let reference = estimate_arl(&rule, &model, &RunConfig::new(40_000, 100_000, 1000).workers(1)).unwrap();
    let mut covered = 0;
    for rep in 0..50 {
        let r = estimate_arl(&rule, &model, &RunConfig::new(400, 100_000, rep).workers(1)).unwrap();
        covered += ((r.mean - reference.mean).abs() <= 1.96 * r.standard_error) as usize;
    }
    let frac = covered as f64 / 50.0;
    assert!((0.86..=0.99).contains(&frac), "coverage {frac}");
}

#[test]
fn sprt_false_alarm_probability_is_bounded() {
    let model = unit_model(3);
    let b = 3.0;
    let rule = OneSidedSprt::new(3, 0.5, b).unwrap();
    let n = 4000;
    let runs = simulate(&rule, &model, Scenario::no_change(), &RunConfig::new(n, 2000, 5).workers(1), 0).unwrap();
    let p = runs.iter().filter(|r| r.stopped).count() as f64 / n as f64;
    let bound = (-b).exp();
    assert!(p <= bound + 3.0 * (bound * (1.0 - bound) / n as f64).sqrt(), "{p}");
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let model = unit_model(3);
    let rule = TopLGlr::new(3, TopLForm::Exactly(2), 4.0, WindowRule::Regeneration).unwrap();
    let a = Subset::from_labels(&[1, 3]).unwrap();
    let cfg = RunConfig::new(300, 10_000, 17);
    let one = estimate_worst_delay(&rule, &model, a, &cfg.workers(1)).unwrap();
    let four = estimate_worst_delay(&rule, &model, a, &cfg.workers(4)).unwrap();
    assert_eq!(one, four);
    assert_eq!(one.mean.to_bits(), four.mean.to_bits());
}

#[test]
fn calibration_hits_the_target() {
    let model = unit_model(2);
    let rule = OracleCusum::new(Subset::first(2).unwrap(), 1.0).unwrap();
    let cfg = CalibrationConfig { workers: 1, ..CalibrationConfig::new(100.0, 500, 8) };
    let c = calibrate_threshold(&rule, &model, 0.0, &cfg).unwrap();
    assert!(c.within_tolerance(0.05), "{:?}", c.achieved_arl);
    let mut check = rule.clone_box();
    check.set_threshold(c.threshold);
    let fresh = estimate_arl(check.as_ref(), &model, &RunConfig::new(4000, 100_000, 99).workers(1)).unwrap();
    assert!((fresh.mean / 100.0 - 1.0).abs() < 0.1, "{}", fresh.mean);
}

/// Sample means of the subset LLR approach the KL number.
#[test]
fn llr_means_match_kl_numbers() {
    let model = IndependentGaussian::new(vec![0.5, -1.0, 2.0]).unwrap();
    let subsets: Vec<Subset> = (1u32..8).map(Subset::from_bits).collect();
    let mut rng = rng(21);
    let n = 50_000;
    let mut sums = vec![0.0; subsets.len()];
    let mut x = vec![0.0; 3];
    let mut llr = vec![0.0; subsets.len()];
    for (i, &a) in subsets.iter().enumerate() {
        for _ in 0..n {
            model.sample(Some(a), &mut rng, &mut x);
            model.subset_llrs(&x, &subsets, &mut llr);
            sums[i] += llr[i];
        }
    }
    for (i, &a) in subsets.iter().enumerate() {
        let kl = model.kl(a).unwrap();
        let sd = (2.0 * kl).sqrt() / (n as f64).sqrt();
        assert!((sums[i] / n as f64 - kl).abs() < 4.0 * sd, "{a}");
    }
}

#[test]
fn identity_covariance_reduces_to_independent() {
    let mu = vec![0.7, 1.2, -0.4];
    let eye = (0..3).map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let corr = CorrelatedGaussian::new(eye, mu.clone()).unwrap();
    let ind = IndependentGaussian::new(mu).unwrap();
    let subsets: Vec<Subset> = (1u32..8).map(Subset::from_bits).collect();
    let mut rng = rng(22);
    let (mut a, mut b) = (vec![0.0; 7], vec![0.0; 7]);
    for _ in 0..200 {
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        corr.subset_llrs(&x, &subsets, &mut a);
        ind.subset_llrs(&x, &subsets, &mut b);
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }
    for &s in &subsets {
        assert!((corr.kl(s).unwrap() - ind.kl(s).unwrap()).abs() < 1e-12);
    }
}

/// Window length under the pre-change law, averaged over time.
fn mean_window(k: usize, rule: WindowRule, seed: u64, steps: usize) -> f64 {
    let model = unit_model(k);
    let mut rng = rng(seed);
    let mut tr = RegenerationTracker::new(k, rule);
    let (mut x, mut llr) = (vec![0.0; k], vec![0.0; k]);
    let mut total = 0usize;
    for _ in 0..steps {
        model.sample(None, &mut rng, &mut x);
        model.sensor_llrs(&x, &mut llr);
        tr.push_increments(&llr);
        total += tr.window_len();
    }
    total as f64 / steps as f64
}

#[test]
fn sigma_windows_are_shorter() {
    for k in 2..=4 {
        let r = mean_window(k, WindowRule::Regeneration, 30 + k as u64, 20_000);
        let s = mean_window(k, WindowRule::Sigma, 30 + k as u64, 20_000);
        assert!(s <= r, "K = {k}: {s} > {r}");
    }
}

#[test]
fn regeneration_windows_stay_bounded() {
    // two independent runs of a stationary window length agree
    let a = mean_window(3, WindowRule::Regeneration, 40, 100_000);
    let b = mean_window(3, WindowRule::Regeneration, 41, 100_000);
    assert!((a - b).abs() < 0.1 * a, "{a} vs {b}");
    assert!(a < 50.0, "{a}");
}
