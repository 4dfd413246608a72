//! GLR-CUSUM: maximize weighted subset CUSUM statistics over a class.

use crate::error::{Error, Result};
use crate::model::{binomial, Subset, SubsetClass, MAX_SENSORS};
use crate::windows::{RegenerationTracker, WindowRule};

use super::{check_threshold, top_sum, Channels, StoppingRule};

/// Brute-force GLR-CUSUM `S_b`: stop when `max_A (Y_t^A + log p_A) ≥ b`.
///
/// Runs one CUSUM recursion per member of the class. Ties in the argmax go to
/// the first member in enumeration order.
#[derive(Debug, Clone)]
pub struct GlrCusum {
    channels: Channels,
    log_weights: Vec<f64>,
    y: Vec<f64>,
    threshold: f64,
    argmax: usize,
}

impl GlrCusum {
    pub fn new(class: &SubsetClass, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let members = class.enumerate()?;
        let log_weights = class.log_weights()?;
        Ok(GlrCusum {
            y: vec![0.0; members.len()],
            channels: Channels::Subsets(members),
            log_weights,
            threshold,
            argmax: 0,
        })
    }

    /// Current `Y_t^A`, aligned with the class enumeration.
    pub fn statistics(&self) -> &[f64] {
        &self.y
    }
}

impl StoppingRule for GlrCusum {
    fn label(&self) -> String {
        format!("S_b(|P|={})", self.y.len())
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
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (i, ((y, l), lw)) in self.y.iter_mut().zip(increments).zip(&self.log_weights).enumerate() {
            *y = (*y + l).max(0.0);
            let v = *y + lw;
            if v > best {
                best = v;
                arg = i;
            }
        }
        self.argmax = arg;
        best
    }

    fn reset(&mut self) {
        self.y.fill(0.0);
        self.argmax = 0;
    }

    fn implicated(&self) -> Option<Subset> {
        match &self.channels {
            Channels::Subsets(m) => m.get(self.argmax).copied(),
            Channels::Sensors(_) => None,
        }
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// Order-statistic form of the GLR-CUSUM for independent sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopLForm {
    /// Class `P_L`: `max_s Σ_{k≤L} Z_{s:t}^{(k)} ≥ b + log C(K,L)`.
    Exactly(usize),
    /// Class `P̄_L` with weights `∝ p^|A|`:
    /// `max_s Σ_{k≤L} (Z_{s:t}^{(k)} + log p)^+ ≥ b + log Σ_{j≤L} C(K,j) p^j`.
    AtMost { l: usize, p: f64 },
}

/// GLR-CUSUM on `P_L` or `P̄_L` evaluated through per-sensor order statistics
/// over an adaptive window, instead of one recursion per subset.
///
/// The reported statistic has the class normalizer subtracted, so it is
/// directly comparable with [`GlrCusum`] at the same threshold.
#[derive(Debug, Clone)]
pub struct TopLGlr {
    form: TopLForm,
    sensors: usize,
    log_p: f64,
    log_normalizer: f64,
    threshold: f64,
    tracker: RegenerationTracker,
    channels: Channels,
    scratch: Vec<f64>,
    best_s: usize,
}

impl TopLGlr {
    pub fn new(sensors: usize, form: TopLForm, threshold: f64, window: WindowRule) -> Result<Self> {
        check_threshold(threshold)?;
        if sensors == 0 || sensors > MAX_SENSORS {
            return Err(Error::Contract(format!("sensor count {sensors} outside 1..={MAX_SENSORS}")));
        }
        let (l, log_p, log_normalizer) = match form {
            TopLForm::Exactly(l) => (l, 0.0, (binomial(sensors, l) as f64).ln()),
            TopLForm::AtMost { l, p } => {
                if !(p.is_finite() && p > 0.0) {
                    return Err(Error::Contract(format!("p = {p} must be positive")));
                }
                let c: f64 = (1..=l.min(sensors)).map(|j| binomial(sensors, j) as f64 * p.powi(j as i32)).sum();
                (l, p.ln(), c.ln())
            }
        };
        if l == 0 || l > sensors {
            return Err(Error::Contract(format!("L = {l} outside 1..={sensors}")));
        }
        Ok(TopLGlr {
            form,
            sensors,
            log_p,
            log_normalizer,
            threshold,
            tracker: RegenerationTracker::new(sensors, window),
            channels: Channels::Sensors(sensors),
            scratch: vec![0.0; 2 * sensors],
            best_s: 0,
        })
    }

    pub fn tracker(&self) -> &RegenerationTracker {
        &self.tracker
    }

    fn l(&self) -> usize {
        match self.form {
            TopLForm::Exactly(l) | TopLForm::AtMost { l, .. } => l,
        }
    }
}

impl StoppingRule for TopLGlr {
    fn label(&self) -> String {
        match self.form {
            TopLForm::Exactly(l) => format!("S_b(P_{l})"),
            TopLForm::AtMost { l, p } => format!("S_b(Pbar_{l},p={p})"),
        }
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
        self.tracker.push_increments(increments);
        let l = self.l();
        let k = self.sensors;
        let log_p = self.log_p;
        let at_most = matches!(self.form, TopLForm::AtMost { .. });
        let (arg, order) = self.scratch.split_at_mut(k);
        let mut best = f64::NEG_INFINITY;
        let mut best_s = 0usize;
        for (s_idx, diffs) in self.tracker.differences().enumerate() {
            for (a, d) in arg.iter_mut().zip(diffs) {
                *a = if at_most { (d + log_p).max(0.0) } else { d };
            }
            let v = top_sum(arg, l, order);
            if v > best {
                best = v;
                best_s = s_idx;
            }
        }
        self.best_s = best_s;
        best - self.log_normalizer
    }

    fn reset(&mut self) {
        self.tracker.reset();
        self.best_s = 0;
    }

    fn is_exact(&self) -> bool {
        self.tracker.rule().is_exact()
    }

    /// Sensors achieving the maximum at the maximizing window entry.
    fn implicated(&self) -> Option<Subset> {
        let diffs: Vec<f64> = self.tracker.differences().nth(self.best_s)?.collect();
        let at_most = matches!(self.form, TopLForm::AtMost { .. });
        let mut idx: Vec<usize> = (0..self.sensors).collect();
        idx.sort_by(|&a, &b| diffs[b].total_cmp(&diffs[a]).then(a.cmp(&b)));
        let chosen = idx.into_iter().take(self.l()).filter(|&i| !at_most || diffs[i] + self.log_p > 0.0);
        Subset::from_indices(chosen).ok()
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}
