//! Rules built from the `K` local CUSUM statistics only.

use crate::error::{Error, Result};

use super::logspace::BernoulliMix;
use super::mixture::check_sensors;
use super::{check_pi, check_threshold, top_sum, Channels, StoppingRule};

/// `M_b(L)`: stop when the sum of the `L` largest local `Y_t^k` reaches `b`.
/// `L = K` is the SUM-CUSUM.
#[derive(Debug, Clone)]
pub struct SumTopL {
    l: usize,
    y: Vec<f64>,
    threshold: f64,
    channels: Channels,
    scratch: Vec<f64>,
}

impl SumTopL {
    pub fn new(sensors: usize, l: usize, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        check_sensors(sensors)?;
        if l == 0 || l > sensors {
            return Err(Error::Contract(format!("L = {l} outside 1..={sensors}")));
        }
        Ok(SumTopL {
            l,
            y: vec![0.0; sensors],
            threshold,
            channels: Channels::Sensors(sensors),
            scratch: vec![0.0; sensors],
        })
    }

    pub fn local_statistics(&self) -> &[f64] {
        &self.y
    }
}

impl StoppingRule for SumTopL {
    fn label(&self) -> String {
        format!("M_b({})", self.l)
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
        for (y, l) in self.y.iter_mut().zip(increments) {
            *y = (*y + l).max(0.0);
        }
        top_sum(&self.y, self.l, &mut self.scratch)
    }

    fn reset(&mut self) {
        self.y.fill(0.0);
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// `M_b(π)`: stop when `Σ_k log(1 − π + π e^{Y_t^k}) ≥ b`.
#[derive(Debug, Clone)]
pub struct MixturePi {
    pi: f64,
    mix: BernoulliMix,
    y: Vec<f64>,
    threshold: f64,
    channels: Channels,
}

impl MixturePi {
    pub fn new(sensors: usize, pi: f64, threshold: f64) -> Result<Self> {
        check_pi(pi, true)?;
        check_threshold(threshold)?;
        check_sensors(sensors)?;
        Ok(MixturePi {
            pi,
            mix: BernoulliMix::new(pi),
            y: vec![0.0; sensors],
            threshold,
            channels: Channels::Sensors(sensors),
        })
    }
}

impl StoppingRule for MixturePi {
    fn label(&self) -> String {
        format!("M_b(pi={})", self.pi)
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
        for (y, l) in self.y.iter_mut().zip(increments) {
            *y = (*y + l).max(0.0);
            s += self.mix.eval(*y);
        }
        s
    }

    fn reset(&mut self) {
        self.y.fill(0.0);
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::{run_on_increments, OracleCusum};
    use crate::model::Subset;

    #[test]
    fn single_sensor_sum_is_oracle() {
        let incs: Vec<[f64; 1]> = [0.3, -0.5, 0.9, 0.2, -0.1, 0.8, 0.7].iter().map(|&v| [v]).collect();
        for b in [0.5, 1.0, 1.7] {
            let mut m = SumTopL::new(1, 1, b).unwrap();
            let mut o = OracleCusum::new(Subset::first(1).unwrap(), b).unwrap();
            let vm = run_on_increments(&mut m, incs.iter().map(|r| &r[..])).unwrap();
            let vo = run_on_increments(&mut o, incs.iter().map(|r| &r[..])).unwrap();
            assert_eq!((vm.time, vm.stopped), (vo.time, vo.stopped));
        }
    }

    #[test]
    fn top_l_sums_largest() {
        let mut m = SumTopL::new(4, 2, 10.0).unwrap();
        let stat = m.update(&[0.5, 2.0, -1.0, 1.0]);
        assert_eq!(stat, 3.0);
        assert_eq!(m.local_statistics(), &[0.5, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn mixture_pi_values() {
        let mut m = MixturePi::new(2, 0.5, 10.0).unwrap();
        assert_eq!(m.update(&[-1.0, -2.0]), 0.0);
        m.reset();
        let stat = m.update(&[1.0, 0.0]);
        assert!((stat - 0.620114506958278).abs() < 1e-12);
        assert!((stat - (0.5 + 0.5 * 1f64.exp()).ln()).abs() < 1e-15);
    }

    #[test]
    fn mixture_pi_one_is_sum_cusum() {
        let mut a = MixturePi::new(3, 1.0, 100.0).unwrap();
        let mut b = SumTopL::new(3, 3, 100.0).unwrap();
        for inc in [[0.2, -0.4, 1.0], [0.3, 0.3, -2.0], [-0.1, 0.9, 0.4]] {
            assert!((a.update(&inc) - b.update(&inc)).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SumTopL::new(3, 0, 1.0).is_err());
        assert!(SumTopL::new(3, 4, 1.0).is_err());
        assert!(MixturePi::new(3, 0.0, 1.0).is_err());
        assert!(MixturePi::new(3, 1.5, 1.0).is_err());
    }
}
