//! Threshold calibration to a target ARL by bisection on common random numbers.
//!
//! A rule's statistic does not depend on its threshold, so on a fixed path the
//! stopping time at `b` is the first time the running maximum of the statistic
//! reaches `b`. Each path keeps the record values of that running maximum and is
//! only ever extended, so every bisection iterate reuses the same paths.

use rayon::prelude::*;
use serde::Serialize;

use super::{default_workers, with_workers, EstimationResult, PathRun, RunRecord};
use crate::detectors::StoppingRule;
use crate::error::{Error, Result};
use crate::model::{Scenario, SensorModel};

const MAX_EXPANSIONS: usize = 4;
const BRACKET_STEP: f64 = 3.0;
const WIDTH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    /// Target ARL `γ`.
    pub target: f64,
    pub rel_tol: f64,
    /// Paths per bisection batch; the confirmation batch is 4× larger.
    pub runs: usize,
    /// Per-path cap; defaults to `50 γ`.
    pub horizon: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    /// Initial bracket; defaults to `[log γ − 3, log γ + log|P| + 3]`.
    pub bracket: Option<(f64, f64)>,
    pub max_iterations: usize,
}

impl CalibrationConfig {
    pub fn new(target: f64, runs: usize, seed: u64) -> Self {
        CalibrationConfig {
            target,
            rel_tol: 0.05,
            runs,
            horizon: None,
            seed,
            workers: default_workers(),
            bracket: None,
            max_iterations: 80,
        }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon.unwrap_or((50.0 * self.target).ceil() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub threshold: f64,
    /// ARL at `threshold` on the confirmation batch.
    pub achieved_arl: EstimationResult,
    pub target: f64,
    /// Bisection steps over both batches.
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// The first-batch threshold met the tolerance on the confirmation batch
    /// without further refinement.
    pub confirmed: bool,
}

impl CalibrationResult {
    pub fn within_tolerance(&self, rel_tol: f64) -> bool {
        within(&self.achieved_arl, self.target, rel_tol)
    }
}

fn within(r: &EstimationResult, target: f64, rel_tol: f64) -> bool {
    let se = if r.standard_error.is_finite() { r.standard_error } else { 0.0 };
    (r.mean - target).abs() <= (rel_tol * target).max(2.0 * se)
}

struct RecordPath<'m> {
    run: PathRun<'m>,
    /// `(t, M_t)` at each strict increase of the running maximum `M_t`.
    records: Vec<(u64, f64)>,
    best: f64,
}

impl RecordPath<'_> {
    fn advance(&mut self, b: f64, cap: u64) -> Result<()> {
        while self.best < b && self.run.time() < cap {
            let s = self.run.step()?;
            if s > self.best {
                self.best = s;
                self.records.push((self.run.time(), s));
            }
        }
        Ok(())
    }

    fn time_for(&self, b: f64) -> Option<u64> {
        let i = self.records.partition_point(|r| r.1 < b);
        self.records.get(i).map(|r| r.0)
    }
}

enum Verdict {
    /// Every path resolved; the mean is known.
    Exact(EstimationResult),
    /// The truncated mean already exceeds the target.
    Above,
}

struct Batch<'m> {
    paths: Vec<RecordPath<'m>>,
    horizon: u64,
    seed: u64,
    workers: usize,
}

impl<'m> Batch<'m> {
    fn new(
        rule: &dyn StoppingRule,
        model: &'m dyn SensorModel,
        seed: u64,
        streams: std::ops::Range<u64>,
        horizon: u64,
        workers: usize,
    ) -> Result<Self> {
        let paths = streams
            .map(|i| {
                Ok(RecordPath {
                    run: PathRun::new(rule, model, Scenario::no_change(), seed, i)?,
                    records: Vec::new(),
                    best: f64::NEG_INFINITY,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch { paths, horizon, seed, workers })
    }

    fn advance(&mut self, b: f64, cap: u64) -> Result<()> {
        let paths = &mut self.paths;
        let out: Vec<Result<()>> =
            with_workers(self.workers, || paths.par_iter_mut().map(|p| p.advance(b, cap)).collect())?;
        out.into_iter().collect()
    }

    fn records_at(&self, b: f64) -> Vec<RunRecord> {
        self.paths
            .iter()
            .map(|p| match p.time_for(b) {
                Some(t) => RunRecord { time: t, stopped: true, first_obs_hash: p.run.first_obs_hash },
                None => RunRecord { time: p.run.time(), stopped: false, first_obs_hash: p.run.first_obs_hash },
            })
            .collect()
    }

    fn estimate(&self, b: f64) -> EstimationResult {
        EstimationResult::from_runs(&self.records_at(b), 0, self.seed, self.horizon)
    }

    /// Decides whether `E_∞[T(b)]` is above `target`, extending paths only as far as needed.
    fn evaluate(&mut self, b: f64, target: f64) -> Result<Verdict> {
        let n = self.paths.len() as f64;
        let mut cap = ((2.0 * target).ceil() as u64).min(self.horizon).max(1);
        loop {
            self.advance(b, cap)?;
            let mut truncated = 0.0;
            let mut resolved = true;
            for p in &self.paths {
                match p.time_for(b) {
                    Some(t) if t <= cap => truncated += t as f64,
                    _ => {
                        resolved = false;
                        truncated += cap as f64;
                    }
                }
            }
            if resolved || cap >= self.horizon {
                return Ok(Verdict::Exact(self.estimate(b)));
            }
            if truncated >= n * target {
                return Ok(Verdict::Above);
            }
            cap = cap.saturating_mul(2).min(self.horizon);
        }
    }

    /// Bisection on `[lo, hi]`; the bracket grows by 3 on either side when needed.
    fn bisect(
        &mut self,
        mut lo: f64,
        mut hi: f64,
        cfg: &CalibrationConfig,
        iterations: &mut usize,
    ) -> Result<(f64, EstimationResult)> {
        let target = cfg.target;
        let mut expansions = 0;
        loop {
            match self.evaluate(lo, target)? {
                Verdict::Exact(r) if r.mean < target => break,
                Verdict::Exact(r) if within(&r, target, cfg.rel_tol) => return Ok((lo, r)),
                _ if expansions < MAX_EXPANSIONS => {
                    expansions += 1;
                    hi = lo;
                    lo -= BRACKET_STEP;
                }
                _ => return Err(Error::Bracket(format!("ARL at lower end b = {lo} already exceeds target {target}"))),
            }
        }
        let mut hi_checked = false;
        let mut expansions = 0;
        loop {
            *iterations += 1;
            if *iterations > cfg.max_iterations {
                return Err(Error::Calibration(format!(
                    "no threshold within tolerance after {} iterations (bracket [{lo}, {hi}])",
                    cfg.max_iterations
                )));
            }
            if hi - lo < WIDTH_TOL {
                if !hi_checked {
                    match self.evaluate(hi, target)? {
                        Verdict::Above => {}
                        Verdict::Exact(r) if r.mean >= target => {}
                        Verdict::Exact(_) if expansions < MAX_EXPANSIONS => {
                            expansions += 1;
                            lo = hi;
                            hi += BRACKET_STEP;
                            continue;
                        }
                        Verdict::Exact(r) => {
                            return Err(Error::Bracket(format!(
                                "ARL at upper end b = {hi} is {} < target {target}",
                                r.mean
                            )))
                        }
                    }
                }
                // the step function jumps over the target; take the smallest b with ARL ≥ γ
                self.evaluate(hi, f64::INFINITY)?;
                return Ok((hi, self.estimate(hi)));
            }
            let mid = 0.5 * (lo + hi);
            match self.evaluate(mid, target)? {
                Verdict::Exact(r) if within(&r, target, cfg.rel_tol) && !r.flagged => return Ok((mid, r)),
                Verdict::Exact(r) if r.mean < target => lo = mid,
                _ => {
                    hi = mid;
                    hi_checked = true;
                }
            }
        }
    }
}

/// Threshold `b` with `E_∞[T_b] ≈ target` for the rule family of `rule`
/// (its own threshold is ignored). `log_class_size` sets the default bracket.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks
pub fn calibrate_threshold(
    rule: &dyn StoppingRule,
    model: &dyn SensorModel,
    log_class_size: f64,
    cfg: &CalibrationConfig,
) -> Result<CalibrationResult> {
    if !(cfg.target.is_finite() && cfg.target > 1.0) {
        return Err(Error::Contract(format!("target ARL {} must exceed 1", cfg.target)));
    }
    if cfg.runs < 2 || !(cfg.rel_tol > 0.0) {
        return Err(Error::Contract("calibration needs at least 2 runs and a positive tolerance".into()));
    }
    let log_gamma = cfg.target.ln();
    let bracket = cfg.bracket.unwrap_or((log_gamma - 3.0, log_gamma + log_class_size + 3.0));
    if !(bracket.0 < bracket.1) {
        return Err(Error::Contract(format!("empty bracket {bracket:?}")));
    }
    let horizon = cfg.horizon();
    let n = cfg.runs as u64;
    let mut iterations = 0;

    let mut first = Batch::new(rule, model, cfg.seed, 0..n, horizon, cfg.workers)?;
    let (b, _) = first.bisect(bracket.0, bracket.1, cfg, &mut iterations)?;
    drop(first);

    let mut confirm = Batch::new(rule, model, cfg.seed, n..5 * n, horizon, cfg.workers)?;
    confirm.evaluate(b, f64::INFINITY)?;
    let achieved = confirm.estimate(b);
    if within(&achieved, cfg.target, cfg.rel_tol) && !achieved.flagged {
        return Ok(CalibrationResult {
            threshold: b,
            achieved_arl: achieved,
            target: cfg.target,
            iterations,
            bracket,
            confirmed: true,
        });
    }
    // refine on the larger batch, which then also reports the achieved ARL
    let (lo, hi) = if achieved.mean < cfg.target { (b, b + 1.0) } else { (b - 1.0, b) };
    let (b, achieved) = confirm.bisect(lo, hi, cfg, &mut iterations)?;
    Ok(CalibrationResult {
        threshold: b,
        achieved_arl: achieved,
        target: cfg.target,
        iterations,
        bracket,
        confirmed: false,
    })
}
