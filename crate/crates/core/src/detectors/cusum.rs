use crate::error::{Error, Result};
use crate::model::Subset;

use super::{check_threshold, Channels, StoppingRule};

/// CUSUM recursions for one subset.
///
/// `y_nonneg` is `Y_t = max(Y_{t−1} + ℓ_t, 0)`, `y_signed` is
/// `Ỹ_t = max(Ỹ_{t−1}, 0) + ℓ_t`, and `z_cum` is the running sum `Z_t`.
/// Invariant: `y_nonneg == max(y_signed, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CusumState {
    pub y_nonneg: f64,
    pub y_signed: f64,
    pub z_cum: f64,
}

impl CusumState {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn step(&mut self, llr: f64) {
        self.y_signed = self.y_signed.max(0.0) + llr;
        self.y_nonneg = self.y_signed.max(0.0);
        self.z_cum += llr;
    }

    /// Checked step; rejects non-finite increments.
    pub fn try_step(&mut self, llr: f64) -> Result<()> {
        if !llr.is_finite() {
            return Err(Error::NonFinite("increment"));
        }
        self.step(llr);
        Ok(())
    }

    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// CUSUM for a known affected subset, `S_b^A = inf{t : Y_t^A ≥ b}`.
#[derive(Debug, Clone)]
pub struct OracleCusum {
    subset: Subset,
    threshold: f64,
    state: CusumState,
    channels: Channels,
}

impl OracleCusum {
    /// The non-negative statistic only matches the signed one for `b > 0`.
    pub fn new(subset: Subset, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        if threshold <= 0.0 {
            return Err(Error::Contract(format!("oracle CUSUM threshold must be positive, got {threshold}")));
        }
        if subset.is_empty() {
            return Err(Error::Contract("empty subset".into()));
        }
        Ok(OracleCusum { subset, threshold, state: CusumState::new(), channels: Channels::Subsets(vec![subset]) })
    }

    pub fn state(&self) -> &CusumState {
        &self.state
    }
}

impl StoppingRule for OracleCusum {
    fn label(&self) -> String {
        format!("S^A{}", self.subset)
    }

    fn channels(&self) -> &Channels {
        &self.channels
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }

    fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    fn update(&mut self, increments: &[f64]) -> f64 {
        self.state.step(increments[0]);
        self.state.y_nonneg
    }

    fn reset(&mut self) {
        self.state.reset();
    }

    fn implicated(&self) -> Option<Subset> {
        Some(self.subset)
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}
