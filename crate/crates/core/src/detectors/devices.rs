//! Auxiliary statistics used to check false-alarm bounds.

use crate::error::Result;
use crate::model::SubsetClass;

use super::logspace::{log_sum_exp, softplus, BernoulliMix};
use super::mixture::check_sensors;
use super::{check_pi, check_threshold, Channels, StoppingRule};

/// Shiryaev–Roberts mixture: `R_t^A = (R_{t−1}^A + 1) e^{ℓ_t^A}`, `R_0^A = 0`;
/// stop when `Σ_A p_A R_t^A ≥ e^b`. State is kept as `log R_t^A`.
#[derive(Debug, Clone)]
pub struct ShiryaevRoberts {
    channels: Channels,
    log_weights: Vec<f64>,
    log_r: Vec<f64>,
    threshold: f64,
}

impl ShiryaevRoberts {
    pub fn new(class: &SubsetClass, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let members = class.enumerate()?;
        let log_weights = class.log_weights()?;
        Ok(ShiryaevRoberts {
            log_r: vec![f64::NEG_INFINITY; members.len()],
            channels: Channels::Subsets(members),
            log_weights,
            threshold,
        })
    }

    /// `log R_t^A`, aligned with the class enumeration.
    pub fn log_statistics(&self) -> &[f64] {
        &self.log_r
    }
}

impl StoppingRule for ShiryaevRoberts {
    fn label(&self) -> String {
        format!("R_b(|P|={})", self.log_r.len())
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
        for (r, l) in self.log_r.iter_mut().zip(increments) {
            *r = l + softplus(*r);
        }
        log_sum_exp(self.log_r.iter().zip(&self.log_weights).map(|(r, lw)| r + lw))
    }

    fn reset(&mut self) {
        self.log_r.fill(f64::NEG_INFINITY);
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// One-sided mixture SPRT `T̂_b(π)`: stop when `Σ_k log(1 − π + π e^{Z_t^k}) ≥ b`.
/// Never resets, so under the pre-change law it stops with probability at most `e^{−b}`.
#[derive(Debug, Clone)]
pub struct OneSidedSprt {
    pi: f64,
    mix: BernoulliMix,
    z: Vec<f64>,
    threshold: f64,
    channels: Channels,
}

impl OneSidedSprt {
    pub fn new(sensors: usize, pi: f64, threshold: f64) -> Result<Self> {
        check_pi(pi, false)?;
        check_threshold(threshold)?;
        check_sensors(sensors)?;
        Ok(OneSidedSprt {
            pi,
            mix: BernoulliMix::new(pi),
            z: vec![0.0; sensors],
            threshold,
            channels: Channels::Sensors(sensors),
        })
    }
}

impl StoppingRule for OneSidedSprt {
    fn label(&self) -> String {
        format!("That_b({})", self.pi)
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
        let mut s = 0.0;
        for (z, l) in self.z.iter_mut().zip(increments) {
            *z += l;
            s += self.mix.eval(*z);
        }
        s
    }

    fn reset(&mut self) {
        self.z.fill(0.0);
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}
