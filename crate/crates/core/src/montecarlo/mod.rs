//! Seeded parallel estimation of false-alarm and detection-delay performance.
//!
//! Replication `i` always draws from `stream_rng(seed, i)` and results are
//! reduced in replication order, so every estimate is bit-identical for any
//! worker count.

mod calibrate;
mod sweep;

use serde::Serialize;

use crate::detectors::{Monitor, StoppingRule};
use crate::error::{Error, Result};
use crate::model::{stream_rng, ObservationStream, Scenario, SensorModel, Subset};

pub use calibrate::{calibrate_threshold, CalibrationConfig, CalibrationResult};
pub use sweep::{performance_sweep, CurvePoint, PerformanceCurve, SweepConfig, SweepDetector};

/// Environment variable read by [`default_workers`].
pub const WORKERS_ENV: &str = "MCUSUM_WORKERS";

/// Fraction of censored runs above which a result is flagged.
pub const CENSOR_FLAG_FRACTION: f64 = 0.001;

/// Worker count from `MCUSUM_WORKERS`, else the number of available cores.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Contract(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub runs: usize,
    pub horizon: u64,
    pub seed: u64,
    pub workers: usize,
}

impl RunConfig {
    pub fn new(runs: usize, horizon: u64, seed: u64) -> Self {
        RunConfig { runs, horizon, seed, workers: default_workers() }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    fn check(&self) -> Result<()> {
        if self.runs == 0 || self.horizon == 0 {
            Err(Error::Contract("runs and horizon must be positive".into()))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    /// Mean over runs that stopped within the horizon (and after `ν`).
    pub mean: f64,
    pub standard_error: f64,
    pub n_runs: usize,
    pub n_censored: usize,
    /// Runs that stopped at or before the change point; excluded from the mean.
    pub n_early: usize,
    pub seed: u64,
    pub horizon: u64,
    /// More than 0.1% of runs censored.
    pub flagged: bool,
    /// Mean of `min(T, horizon)` over all runs: a lower bound on the full mean.
    pub truncated_mean: f64,
    /// FNV-1a hash of the first observation of every replication, in order.
    pub checksum: u64,
}

impl EstimationResult {
    fn from_runs(runs: &[RunRecord], nu: u64, seed: u64, horizon: u64) -> Self {
        let mut n = 0usize;
        let mut mean = 0.0;
        let mut m2 = 0.0;
        let mut n_censored = 0;
        let mut n_early = 0;
        let mut truncated = 0.0;
        let mut checksum = Fnv::new();
        for r in runs {
            checksum.write(r.first_obs_hash);
            truncated += r.time as f64;
            if !r.stopped {
                n_censored += 1;
                continue;
            }
            if r.time <= nu {
                n_early += 1;
                continue;
            }
            // Welford update
            n += 1;
            let x = (r.time - nu) as f64;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let (mean, se) = match n {
            0 => (f64::NAN, f64::NAN),
            1 => (mean, f64::NAN),
            _ => (mean, (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt()),
        };
        EstimationResult {
            mean,
            standard_error: se,
            n_runs: runs.len(),
            n_censored,
            n_early,
            seed,
            horizon,
            flagged: n_censored as f64 > CENSOR_FLAG_FRACTION * runs.len() as f64,
            truncated_mean: truncated / runs.len().max(1) as f64,
            checksum: checksum.finish(),
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub time: u64,
    pub stopped: bool,
    pub first_obs_hash: u64,
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

fn hash_obs(x: &[f64]) -> u64 {
    let mut h = Fnv::new();
    for v in x {
        h.write(v.to_bits());
    }
    h.finish()
}

/// One monitored path: a detector plus its private observation stream.
pub(crate) struct PathRun<'m> {
    monitor: Monitor<'m>,
    stream: ObservationStream<'m>,
    obs: Vec<f64>,
    first_obs_hash: u64,
}

impl<'m> PathRun<'m> {
    pub(crate) fn new(
        rule: &dyn StoppingRule,
        model: &'m dyn SensorModel,
        scenario: Scenario,
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        let mut r = rule.clone_box();
        r.reset();
        Ok(PathRun {
            monitor: Monitor::new(model, r)?,
            stream: ObservationStream::new(model, scenario, stream_rng(seed, stream))?,
            obs: vec![0.0; model.sensors()],
            first_obs_hash: 0,
        })
    }

    /// Advances one step and returns the new statistic.
    pub(crate) fn step(&mut self) -> Result<f64> {
        let t = self.stream.next_into(&mut self.obs);
        if t == 1 {
            self.first_obs_hash = hash_obs(&self.obs);
        }
        self.monitor.observe(&self.obs)?;
        Ok(self.monitor.statistic())
    }

    pub(crate) fn time(&self) -> u64 {
        self.monitor.time()
    }

    fn run(mut self, horizon: u64) -> Result<RunRecord> {
        let threshold = self.monitor.rule().threshold();
        while self.time() < horizon {
            if self.step()? >= threshold {
                return Ok(RunRecord { time: self.time(), stopped: true, first_obs_hash: self.first_obs_hash });
            }
        }
        Ok(RunRecord { time: self.time(), stopped: false, first_obs_hash: self.first_obs_hash })
    }
}

/// Runs `cfg.runs` replications of `rule` under `scenario`, streams `first_stream..`.
pub fn simulate(
    rule: &dyn StoppingRule,
    model: &dyn SensorModel,
    scenario: Scenario,
    cfg: &RunConfig,
    first_stream: u64,
) -> Result<Vec<RunRecord>> {
    use rayon::prelude::*;
    cfg.check()?;
    // validate once up front so errors surface before spawning work
    PathRun::new(rule, model, scenario, cfg.seed, first_stream)?;
    let proto = rule.clone_box();
    let out: Vec<Result<RunRecord>> = with_workers(cfg.workers, || {
        (0..cfg.runs as u64)
            .into_par_iter()
            .map(|i| PathRun::new(proto.as_ref(), model, scenario, cfg.seed, first_stream + i)?.run(cfg.horizon))
            .collect()
    })?;
    out.into_iter().collect()
}

/// `E_∞[T]` from paths without a change.
pub fn estimate_arl(rule: &dyn StoppingRule, model: &dyn SensorModel, cfg: &RunConfig) -> Result<EstimationResult> {
    let runs = simulate(rule, model, Scenario::no_change(), cfg, 0)?;
    Ok(EstimationResult::from_runs(&runs, 0, cfg.seed, cfg.horizon))
}

/// `E_0^A[T]`, the worst-case conditional delay for CUSUM-type rules.
pub fn estimate_worst_delay(
    rule: &dyn StoppingRule,
    model: &dyn SensorModel,
    affected: Subset,
    cfg: &RunConfig,
) -> Result<EstimationResult> {
    let runs = simulate(rule, model, Scenario::immediate(affected)?, cfg, 0)?;
    Ok(EstimationResult::from_runs(&runs, 0, cfg.seed, cfg.horizon))
}

/// `E_ν^A[T − ν | T > ν]`; runs stopping by `ν` are counted in `n_early`.
pub fn estimate_delay(
    rule: &dyn StoppingRule,
    model: &dyn SensorModel,
    scenario: Scenario,
    cfg: &RunConfig,
) -> Result<EstimationResult> {
    let runs = simulate(rule, model, scenario, cfg, 0)?;
    Ok(EstimationResult::from_runs(&runs, scenario.change_point().unwrap_or(0), cfg.seed, cfg.horizon))
}
