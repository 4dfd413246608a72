#![allow(dead_code)]

use mcusum::detectors::{Monitor, StoppingRule, Verdict};
use mcusum::model::{sample_path, stream_rng, IndependentGaussian, Scenario, SensorModel, SimRng, Subset};
use rand::Rng;

/// Independent model with `2..=max_k` sensors and shifts of mixed sign and size.
pub fn random_model(rng: &mut SimRng, max_k: usize) -> IndependentGaussian {
    let k = rng.random_range(2..=max_k);
    let thetas = (0..k)
        .map(|_| {
            let m: f64 = rng.random_range(0.4..2.0);
            if rng.random_bool(0.25) {
                -m
            } else {
                m
            }
        })
        .collect();
    IndependentGaussian::new(thetas).unwrap()
}

/// A path of `len` observations with a change at a random time in a random subset.
pub fn random_path(model: &dyn SensorModel, rng: &mut SimRng, len: usize, seed: u64) -> Vec<Vec<f64>> {
    let k = model.sensors();
    let bits = rng.random_range(1..(1u32 << k));
    let nu = rng.random_range(0..len as u64 / 2);
    let scenario = Scenario::change_at(nu, Subset::from_bits(bits)).unwrap();
    sample_path(model, scenario, seed, len).unwrap()
}

pub fn sensor_llrs(model: &dyn SensorModel, path: &[Vec<f64>]) -> Vec<Vec<f64>> {
    path.iter()
        .map(|x| {
            let mut out = vec![0.0; model.sensors()];
            assert!(model.sensor_llrs(x, &mut out));
            out
        })
        .collect()
}

pub fn run(model: &dyn SensorModel, rule: Box<dyn StoppingRule>, path: &[Vec<f64>]) -> Verdict {
    let mut m = Monitor::new(model, rule).unwrap();
    m.run(path.iter().map(Vec::as_slice)).unwrap()
}

/// Stopping time, `None` if the path ran out first.
pub fn stop(model: &dyn SensorModel, rule: Box<dyn StoppingRule>, path: &[Vec<f64>]) -> Option<u64> {
    let v = run(model, rule, path);
    v.stopped.then_some(v.time)
}

/// Statistic after every step, without stopping.
pub fn trace(model: &dyn SensorModel, rule: Box<dyn StoppingRule>, path: &[Vec<f64>]) -> Vec<f64> {
    let mut rule = rule;
    rule.set_threshold(f64::MAX);
    let mut m = Monitor::new(model, rule).unwrap();
    path.iter()
        .map(|x| {
            m.observe(x).unwrap();
            m.statistic()
        })
        .collect()
}

pub fn first_crossing(trace: &[f64], b: f64) -> Option<u64> {
    trace.iter().position(|&s| s >= b).map(|i| i as u64 + 1)
}

pub fn rng(seed: u64) -> SimRng {
    stream_rng(seed, u64::MAX)
}

/// `log(Π_k (1 + p e^{d_k}) − 1) − log C`: log of `Σ_{A ≠ ∅} p^|A| e^{Σ_{k∈A} d_k} / C`.
pub fn sbar_power_all(d: &[f64], p: f64, log_c: f64) -> f64 {
    let s: f64 = d.iter().map(|&x| (p * x.exp()).ln_1p()).sum();
    s.exp_m1().ln() - log_c
}
