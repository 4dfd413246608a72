//! Experiment configuration, read from a single TOML file.

use std::path::{Path, PathBuf};

use mcusum::detectors::DetectorSpec;
use mcusum::model::{ModelSpec, SensorModel};
use mcusum::renewal::ThresholdSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub model: ModelSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table1: Option<Table1Config>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<CalibrateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure1: Option<Figure1Config>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("results") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedDetector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub detector: DetectorSpec,
}

impl NamedDetector {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.detector.label())
    }
}

/// Fixed-threshold delay table. The change hits sensors `1..=affected` at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    pub delay_runs: usize,
    #[serde(default = "default_delay_horizon")]
    pub delay_horizon: u64,
    /// 0 skips the false-alarm column.
    #[serde(default)]
    pub arl_runs: usize,
    #[serde(default = "default_arl_horizon")]
    pub arl_horizon: u64,
    pub rows: Vec<Table1Row>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Row {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub affected: usize,
    pub threshold: f64,
    pub detector: DetectorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub gamma: f64,
    pub runs: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Per-path cap; defaults to 50 γ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u64>,
    pub detectors: Vec<NamedDetector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub gammas: Vec<f64>,
    /// Sizes `|A|`; each scenario changes sensors `1..=|A|`.
    pub affected: Vec<usize>,
    pub calibration_runs: usize,
    pub delay_runs: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_delay_horizon")]
    pub delay_horizon: u64,
    pub detectors: Vec<NamedDetector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsConfig {
    pub thetas: Vec<f64>,
    /// Multichart designs at this γ for the model's shifts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default = "all_specs")]
    pub specs: Vec<ThresholdSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Config {
    pub theta1: f64,
    pub theta2_min: f64,
    pub theta2_max: f64,
    pub points: usize,
    pub gamma: f64,
    #[serde(default = "weighted_specs")]
    pub specs: Vec<ThresholdSpec>,
    /// γ grid for the proportional-to-information delay ratios.
    pub ratio_gammas: Vec<f64>,
    pub ratio_theta2: f64,
}

impl Figure1Config {
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.theta2_min];
        }
        let step = (self.theta2_max - self.theta2_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.theta2_min + step * i as f64).collect()
    }
}

fn default_delay_horizon() -> u64 {
    100_000
}

fn default_arl_horizon() -> u64 {
    10_000_000
}

fn default_rel_tol() -> f64 {
    0.05
}

fn all_specs() -> Vec<ThresholdSpec> {
    let mut v = ThresholdSpec::WEIGHTED.to_vec();
    v.push(ThresholdSpec::ProportionalToInfo);
    v
}

fn weighted_specs() -> Vec<ThresholdSpec> {
    ThresholdSpec::WEIGHTED.to_vec()
}

/// Command-line overrides applied after parsing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.out {
            self.output.dir = dir.clone();
        }
        if let Some(n) = o.runs {
            if let Some(t) = &mut self.table1 {
                t.delay_runs = n;
                if t.arl_runs > 0 {
                    t.arl_runs = n;
                }
            }
            if let Some(c) = &mut self.calibrate {
                c.runs = n;
            }
            if let Some(s) = &mut self.sweep {
                s.calibration_runs = n;
                s.delay_runs = n;
            }
        }
    }

    /// Checks everything that can be checked without simulating.
    pub fn validate(&self) -> Result<Box<dyn SensorModel>, CliError> {
        let model = self.model.build().map_err(|e| invalid(format!("model: {e}")))?;
        let k = model.sensors();
        let check_detector = |d: &DetectorSpec, what: &str| {
            d.build(model.as_ref(), 1.0).map(|_| ()).map_err(|e| invalid(format!("{what}: {e}")))
        };
        let positive = |n: usize, what: &str| {
            if n == 0 {
                Err(invalid(format!("{what} must be positive")))
            } else {
                Ok(())
            }
        };
        let check_gammas = |g: &[f64], what: &str| {
            if g.is_empty() || g.iter().any(|&x| !(x.is_finite() && x > 1.0)) {
                return Err(invalid(format!("{what}: every γ must be finite and exceed 1")));
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(invalid(format!("{what}: γ values must be strictly increasing")));
            }
            Ok(())
        };
        let check_affected = |a: usize, what: &str| {
            if a == 0 || a > k {
                Err(invalid(format!("{what}: |A| = {a} outside 1..={k}")))
            } else {
                Ok(())
            }
        };

        if let Some(t) = &self.table1 {
            positive(t.delay_runs, "table1.delay_runs")?;
            positive(t.delay_horizon as usize, "table1.delay_horizon")?;
            positive(t.arl_horizon as usize, "table1.arl_horizon")?;
            if t.rows.is_empty() {
                return Err(invalid("table1 has no rows"));
            }
            for (i, row) in t.rows.iter().enumerate() {
                let what = format!("table1.rows[{i}]");
                check_affected(row.affected, &what)?;
                if !(row.threshold.is_finite() && row.threshold > 0.0) {
                    return Err(invalid(format!("{what}: threshold {} must be positive", row.threshold)));
                }
                check_detector(&row.detector, &what)?;
                if let DetectorSpec::Oracle { affected } = &row.detector {
                    let expect: Vec<usize> = (1..=row.affected).collect();
                    if *affected != expect {
                        return Err(invalid(format!(
                            "{what}: oracle set {affected:?} does not match |A| = {}",
                            row.affected
                        )));
                    }
                }
            }
        }
        if let Some(c) = &self.calibrate {
            check_gammas(&[c.gamma], "calibrate.gamma")?;
            if c.runs < 2 {
                return Err(invalid("calibrate.runs must be at least 2"));
            }
            if !(c.rel_tol > 0.0 && c.rel_tol < 1.0) {
                return Err(invalid("calibrate.rel_tol must lie in (0, 1)"));
            }
            if c.detectors.is_empty() {
                return Err(invalid("calibrate has no detectors"));
            }
            for (i, d) in c.detectors.iter().enumerate() {
                check_detector(&d.detector, &format!("calibrate.detectors[{i}]"))?;
            }
        }
        if let Some(s) = &self.sweep {
            check_gammas(&s.gammas, "sweep.gammas")?;
            if s.calibration_runs < 2 {
                return Err(invalid("sweep.calibration_runs must be at least 2"));
            }
            positive(s.delay_runs, "sweep.delay_runs")?;
            if !(s.rel_tol > 0.0 && s.rel_tol < 1.0) {
                return Err(invalid("sweep.rel_tol must lie in (0, 1)"));
            }
            if s.affected.is_empty() {
                return Err(invalid("sweep.affected is empty"));
            }
            for &a in &s.affected {
                check_affected(a, "sweep.affected")?;
            }
            for (i, d) in s.detectors.iter().enumerate() {
                check_detector(&d.detector, &format!("sweep.detectors[{i}]"))?;
            }
        }
        if let Some(c) = &self.constants {
            if c.thetas.is_empty() || c.thetas.iter().any(|t| !(t.is_finite() && *t != 0.0)) {
                return Err(invalid("constants.thetas must be finite and nonzero"));
            }
            if let Some(g) = c.gamma {
                check_gammas(&[g], "constants.gamma")?;
                if self.model_thetas().is_none() {
                    return Err(invalid("constants.gamma needs an independent Gaussian model"));
                }
            }
        }
        if let Some(f) = &self.figure1 {
            let ok = |t: f64| t.is_finite() && t > 0.0;
            if !(ok(f.theta1) && ok(f.theta2_min) && ok(f.theta2_max) && ok(f.ratio_theta2)) {
                return Err(invalid("figure1 shifts must be positive"));
            }
            if f.theta2_min > f.theta2_max {
                return Err(invalid("figure1.theta2_min exceeds theta2_max"));
            }
            positive(f.points, "figure1.points")?;
            check_gammas(&[f.gamma], "figure1.gamma")?;
            check_gammas(&f.ratio_gammas, "figure1.ratio_gammas")?;
            if f.specs.contains(&ThresholdSpec::ProportionalToInfo) {
                return Err(invalid("figure1.specs takes only the weighted specs"));
            }
        }
        Ok(model)
    }

    pub fn model_thetas(&self) -> Option<&[f64]> {
        match &self.model {
            ModelSpec::IndependentGaussian { thetas } => Some(thetas),
            ModelSpec::CorrelatedGaussian { .. } => None,
        }
    }
}
