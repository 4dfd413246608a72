//! Mixture CUSUM rules: average likelihood ratios over subsets instead of maximizing.

use crate::error::{Error, Result};
use crate::model::{binomial, ClassKind, SubsetClass, WeightSpec, MAX_SENSORS};
use crate::windows::{RegenerationTracker, WindowRule};

use super::logspace::{log_add_exp, log_sum_exp, BernoulliMix};
use super::{check_pi, check_threshold, Channels, StoppingRule};

#[derive(Debug, Clone)]
enum SbarEngine {
    /// Window over subset coordinates `Z^A`; log-sum-exp over members per entry.
    Enumerated { log_weights: Vec<f64> },
    /// Window over sensor coordinates; elementary symmetric polynomials of
    /// `p e^{Z_{s:t}^k}` give the power-weighted sum over `P_L` or `P̄_L`.
    Factorized { sizes: (usize, usize), log_p: f64, log_normalizer: f64 },
}

/// `S̄_b`: stop when `max_s Σ_A p_A exp(Z_t^A − Z_s^A) ≥ e^b`, evaluated in log space.
#[derive(Debug, Clone)]
pub struct SbarMixture {
    engine: SbarEngine,
    threshold: f64,
    tracker: RegenerationTracker,
    channels: Channels,
    scratch: Vec<f64>,
}

impl SbarMixture {
    /// One coordinate per class member. Works for any model and any weights.
    pub fn enumerated(class: &SubsetClass, threshold: f64, window: WindowRule) -> Result<Self> {
        check_threshold(threshold)?;
        let members = class.enumerate()?;
        let log_weights = class.log_weights()?;
        let n = members.len();
        Ok(SbarMixture {
            engine: SbarEngine::Enumerated { log_weights },
            threshold,
            tracker: RegenerationTracker::new(n, window),
            channels: Channels::Subsets(members),
            scratch: vec![0.0; n],
        })
    }

    /// Per-sensor form for `P_L` / `P̄_L` with weights `∝ p^|A|`; needs independent sensors.
    pub fn factorized(class: &SubsetClass, threshold: f64, window: WindowRule) -> Result<Self> {
        check_threshold(threshold)?;
        let k = class.sensors();
        let WeightSpec::Power(p) = *class.weight_spec() else {
            return Err(Error::Contract("factorized S̄ needs power weights".into()));
        };
        let sizes = match *class.kind() {
            ClassKind::Exactly(l) => (l, l),
            ClassKind::AtMost(l) => (1, l),
            ClassKind::Explicit(_) => {
                return Err(Error::Contract("factorized S̄ needs an exactly-L or at-most-L class".into()))
            }
        };
        let log_normalizer = class.power_normalizer().map(f64::ln).unwrap_or(0.0);
        Ok(SbarMixture {
            engine: SbarEngine::Factorized { sizes, log_p: p.ln(), log_normalizer },
            threshold,
            tracker: RegenerationTracker::new(k, window),
            channels: Channels::Sensors(k),
            scratch: vec![0.0; 2 * (k + 1)],
        })
    }

    /// Factorized when possible, enumerated otherwise.
    pub fn for_class(class: &SubsetClass, independent: bool, threshold: f64, window: WindowRule) -> Result<Self> {
        let power = matches!(class.weight_spec(), WeightSpec::Power(_));
        let structured = !matches!(class.kind(), ClassKind::Explicit(_));
        if independent && power && structured {
            Self::factorized(class, threshold, window)
        } else {
            Self::enumerated(class, threshold, window)
        }
    }

    pub fn tracker(&self) -> &RegenerationTracker {
        &self.tracker
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self.engine, SbarEngine::Factorized { .. })
    }
}

/// `log Σ_{j=lo..=hi} e_j(e^{u_1}, …, e^{u_K})`, with `e_j` the elementary
/// symmetric polynomials, computed after rescaling by `max(u)`.
fn log_esp_range(u: &[f64], lo: usize, hi: usize, e: &mut [f64]) -> f64 {
    let m = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = &mut e[..=hi];
    e.fill(0.0);
    e[0] = 1.0;
    for &uk in u {
        let x = (uk - m).exp();
        for j in (1..=hi).rev() {
            e[j] += x * e[j - 1];
        }
    }
    if e[lo..=hi].iter().any(|&v| v < 1e-280) {
        // products near the subnormal range lose digits; redo the recursion in logs
        e.fill(f64::NEG_INFINITY);
        e[0] = 0.0;
        for &uk in u {
            for j in (1..=hi).rev() {
                e[j] = log_add_exp(e[j], uk + e[j - 1]);
            }
        }
        return log_sum_exp(e[lo..=hi].iter().copied());
    }
    // e_j(e^u) = e^{j m} e_j(e^{u - m})
    log_sum_exp((lo..=hi).map(|j| j as f64 * m + e[j].ln()))
}

impl StoppingRule for SbarMixture {
    fn label(&self) -> String {
        let w = match self.tracker.rule() {
            WindowRule::Regeneration => "",
            WindowRule::Sigma => ",sigma",
        };
        match &self.engine {
            SbarEngine::Enumerated { log_weights } => format!("Sbar_b(|P|={}{w})", log_weights.len()),
            SbarEngine::Factorized { sizes: (lo, hi), .. } if lo == hi => format!("Sbar_b(P_{hi}{w})"),
            SbarEngine::Factorized { sizes: (_, hi), .. } => format!("Sbar_b(Pbar_{hi}{w})"),
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
        match &self.engine {
            SbarEngine::Enumerated { log_weights } => self
                .tracker
                .windowed_max(&mut self.scratch, |d| log_sum_exp(d.iter().zip(log_weights).map(|(z, lw)| z + lw))),
            &SbarEngine::Factorized { sizes: (lo, hi), log_p, log_normalizer } => {
                let k = self.tracker.dim();
                let (arg, esp) = self.scratch.split_at_mut(k);
                let mut best = f64::NEG_INFINITY;
                for diffs in self.tracker.differences() {
                    for (a, d) in arg.iter_mut().zip(diffs) {
                        *a = d + log_p;
                    }
                    let v = log_esp_range(arg, lo, hi, esp);
                    if v > best {
                        best = v;
                    }
                }
                best - log_normalizer
            }
        }
    }

    fn reset(&mut self) {
        self.tracker.reset();
    }

    fn is_exact(&self) -> bool {
        self.tracker.rule().is_exact()
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// `S̃_b`: stop when `Σ_A p_A exp(Ỹ_t^A) ≥ e^b`, one signed CUSUM per member.
#[derive(Debug, Clone)]
pub struct StildeMixture {
    channels: Channels,
    log_weights: Vec<f64>,
    y_signed: Vec<f64>,
    threshold: f64,
}

impl StildeMixture {
    pub fn new(class: &SubsetClass, threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let members = class.enumerate()?;
        let log_weights = class.log_weights()?;
        Ok(StildeMixture {
            y_signed: vec![0.0; members.len()],
            channels: Channels::Subsets(members),
            log_weights,
            threshold,
        })
    }

    /// Current `Ỹ_t^A`, aligned with the class enumeration.
    pub fn statistics(&self) -> &[f64] {
        &self.y_signed
    }
}

impl StoppingRule for StildeMixture {
    fn label(&self) -> String {
        format!("Stilde_b(|P|={})", self.y_signed.len())
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
        for (y, l) in self.y_signed.iter_mut().zip(increments) {
            *y = y.max(0.0) + l;
        }
        log_sum_exp(self.y_signed.iter().zip(&self.log_weights).map(|(y, lw)| y + lw))
    }

    fn reset(&mut self) {
        self.y_signed.fill(0.0);
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// Threshold `b̂` at which `Ŝ(π)` stops exactly when `S̄_b` does on `P̄_K`
/// with weights `∝ p^|A|`, `π = p/(1+p)`:
/// `b̂ = K log(1−π) + log(e^b Σ_B p^|B| + 1)`, from
/// `Π_k (1−π+π e^{d_k}) = (1−π)^K (1 + Σ_A p^|A| e^{d_A})`.
pub fn shat_threshold(b: f64, sensors: usize, pi: f64) -> Result<f64> {
    check_pi(pi, false)?;
    check_threshold(b)?;
    let p = pi / (1.0 - pi);
    let c: f64 = (1..=sensors).map(|j| binomial(sensors, j) as f64 * p.powi(j as i32)).sum();
    Ok(sensors as f64 * (1.0 - pi).ln() + log_add_exp(b + c.ln(), 0.0))
}

pub(crate) fn check_sensors(k: usize) -> Result<()> {
    if k == 0 || k > MAX_SENSORS {
        Err(Error::Contract(format!("sensor count {k} outside 1..={MAX_SENSORS}")))
    } else {
        Ok(())
    }
}

/// `Ŝ_b(π)`: stop when `max_s Σ_k log(1 − π + π e^{Z_{s:t}^k}) ≥ b`.
#[derive(Debug, Clone)]
pub struct ShatMixture {
    pi: f64,
    mix: BernoulliMix,
    threshold: f64,
    tracker: RegenerationTracker,
    channels: Channels,
    scratch: Vec<f64>,
}

impl ShatMixture {
    pub fn new(sensors: usize, pi: f64, threshold: f64, window: WindowRule) -> Result<Self> {
        check_pi(pi, false)?;
        check_threshold(threshold)?;
        check_sensors(sensors)?;
        Ok(ShatMixture {
            pi,
            mix: BernoulliMix::new(pi),
            threshold,
            tracker: RegenerationTracker::new(sensors, window),
            channels: Channels::Sensors(sensors),
            scratch: vec![0.0; sensors],
        })
    }

    pub fn tracker(&self) -> &RegenerationTracker {
        &self.tracker
    }
}

impl StoppingRule for ShatMixture {
    fn label(&self) -> String {
        let w = if self.tracker.rule().is_exact() { "" } else { ",sigma" };
        format!("Shat_b({}{w})", self.pi)
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
        let mix = self.mix;
        self.tracker.windowed_max(&mut self.scratch, |d| d.iter().map(|&z| mix.eval(z)).sum())
    }

    fn reset(&mut self) {
        self.tracker.reset();
    }

    fn is_exact(&self) -> bool {
        self.tracker.rule().is_exact()
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}

/// Xie–Siegmund rule `Š_b(π)`: stop when
/// `max_s Σ_k log(1 − π + π e^{(Z_{s:t}^k)^+}) ≥ b`.
#[derive(Debug, Clone)]
pub struct XieSiegmund {
    pi: f64,
    mix: BernoulliMix,
    threshold: f64,
    tracker: RegenerationTracker,
    channels: Channels,
    scratch: Vec<f64>,
}

impl XieSiegmund {
    pub fn new(sensors: usize, pi: f64, threshold: f64, window: WindowRule) -> Result<Self> {
        check_pi(pi, true)?;
        check_threshold(threshold)?;
        check_sensors(sensors)?;
        Ok(XieSiegmund {
            pi,
            mix: BernoulliMix::new(pi),
            threshold,
            tracker: RegenerationTracker::new(sensors, window),
            channels: Channels::Sensors(sensors),
            scratch: vec![0.0; sensors],
        })
    }

    pub fn tracker(&self) -> &RegenerationTracker {
        &self.tracker
    }
}

impl StoppingRule for XieSiegmund {
    fn label(&self) -> String {
        let w = if self.tracker.rule().is_exact() { "" } else { ",sigma" };
        format!("Scheck_b({}{w})", self.pi)
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
        let mix = self.mix;
        self.tracker.windowed_max(&mut self.scratch, |d| d.iter().map(|&z| mix.eval(z.max(0.0))).sum())
    }

    fn reset(&mut self) {
        self.tracker.reset();
    }

    fn is_exact(&self) -> bool {
        self.tracker.rule().is_exact()
    }

    fn clone_box(&self) -> Box<dyn StoppingRule> {
        Box::new(self.clone())
    }
}
