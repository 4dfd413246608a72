//! Delay-versus-ARL curves relative to the oracle CUSUM.

use serde::Serialize;

use super::{
    calibrate_threshold, default_workers, estimate_worst_delay, CalibrationConfig, EstimationResult, RunConfig,
};
use crate::detectors::{OracleCusum, StoppingRule};
use crate::error::{Error, Result};
use crate::model::{SensorModel, Subset};

/// A rule family to sweep; the prototype's own threshold is ignored.
#[derive(Debug)]
pub struct SweepDetector {
    pub label: String,
    pub rule: Box<dyn StoppingRule>,
    pub log_class_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Target ARLs, strictly increasing.
    pub gammas: Vec<f64>,
    pub calibration_runs: usize,
    pub delay_runs: usize,
    pub rel_tol: f64,
    /// Cap on delay runs.
    pub delay_horizon: u64,
    pub seed: u64,
    pub workers: usize,
}

impl SweepConfig {
    pub fn new(gammas: Vec<f64>, calibration_runs: usize, delay_runs: usize, seed: u64) -> Self {
        SweepConfig {
            gammas,
            calibration_runs,
            delay_runs,
            rel_tol: 0.05,
            delay_horizon: 100_000,
            seed,
            workers: default_workers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub gamma: f64,
    pub threshold: f64,
    pub arl: EstimationResult,
    pub delay: EstimationResult,
    pub oracle_threshold: f64,
    pub oracle_delay: EstimationResult,
    pub delay_minus_oracle: f64,
    pub delay_minus_oracle_se: f64,
    pub delay_over_oracle: f64,
    pub delay_over_oracle_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceCurve {
    pub detector: String,
    /// 1-based labels of the affected sensors.
    pub affected: Vec<usize>,
    pub points: Vec<CurvePoint>,
}

/// For each target ARL, calibrates every detector and the oracle CUSUM of each
/// scenario, then estimates delays under `P_0^A`. All detectors see the same
/// paths: calibration uses `seed`, delays use `seed + 1`.
pub fn performance_sweep(
    detectors: &[SweepDetector],
    model: &dyn SensorModel,
    scenarios: &[Subset],
    cfg: &SweepConfig,
) -> Result<Vec<PerformanceCurve>> {
    if cfg.gammas.windows(2).any(|w| w[0] >= w[1]) || cfg.gammas.is_empty() {
        return Err(Error::Contract("target ARLs must be nonempty and strictly increasing".into()));
    }
    let mut cal = CalibrationConfig::new(1.0, cfg.calibration_runs, cfg.seed);
    cal.rel_tol = cfg.rel_tol;
    cal.workers = cfg.workers;
    let delay_cfg = RunConfig::new(cfg.delay_runs, cfg.delay_horizon, cfg.seed.wrapping_add(1)).workers(cfg.workers);

    let calibrate = |rule: &dyn StoppingRule, log_size: f64, gamma: f64| {
        calibrate_threshold(rule, model, log_size, &CalibrationConfig { target: gamma, ..cal.clone() })
    };
    let delay_at = |rule: &dyn StoppingRule, b: f64, a: Subset| -> Result<EstimationResult> {
        let mut r = rule.clone_box();
        r.set_threshold(b);
        let est = estimate_worst_delay(r.as_ref(), model, a, &delay_cfg)?;
        if est.n_censored > 0 {
            return Err(Error::Calibration(format!(
                "{} censored delay runs for {} at b = {b}",
                est.n_censored,
                rule.label()
            )));
        }
        Ok(est)
    };

    // thresholds do not depend on the scenario
    let mut calibrated = Vec::with_capacity(detectors.len());
    for d in detectors {
        let per_gamma =
            cfg.gammas.iter().map(|&g| calibrate(d.rule.as_ref(), d.log_class_size, g)).collect::<Result<Vec<_>>>()?;
        calibrated.push(per_gamma);
    }

    let mut curves = Vec::new();
    for &a in scenarios {
        let oracle = OracleCusum::new(a, 1.0)?;
        let mut oracle_points = Vec::with_capacity(cfg.gammas.len());
        for &g in &cfg.gammas {
            let c = calibrate(&oracle, 0.0, g)?;
            let delay = delay_at(&oracle, c.threshold, a)?;
            oracle_points.push((c.threshold, delay));
        }
        for (d, cals) in detectors.iter().zip(&calibrated) {
            let mut points = Vec::with_capacity(cals.len());
            for (c, (ob, od)) in cals.iter().zip(&oracle_points) {
                let delay = delay_at(d.rule.as_ref(), c.threshold, a)?;
                if delay.checksum != od.checksum {
                    return Err(Error::Contract("paired delay runs saw different paths".into()));
                }
                let diff = delay.mean - od.mean;
                let diff_se = delay.standard_error.hypot(od.standard_error);
                let ratio = delay.mean / od.mean;
                let ratio_se = ratio * (delay.standard_error / delay.mean).hypot(od.standard_error / od.mean);
                points.push(CurvePoint {
                    gamma: c.target,
                    threshold: c.threshold,
                    arl: c.achieved_arl.clone(),
                    delay,
                    oracle_threshold: *ob,
                    oracle_delay: od.clone(),
                    delay_minus_oracle: diff,
                    delay_minus_oracle_se: diff_se,
                    delay_over_oracle: ratio,
                    delay_over_oracle_se: ratio_se,
                });
            }
            curves.push(PerformanceCurve { detector: d.label.clone(), affected: a.labels(), points });
        }
    }
    Ok(curves)
}
