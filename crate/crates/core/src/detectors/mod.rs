//! Stopping rules as resettable streaming state machines.
//!
//! Every rule consumes one step of log-likelihood-ratio increments at a time,
//! either per sensor ([`Channels::Sensors`]) or per candidate subset
//! ([`Channels::Subsets`]), and reports its detection statistic on the log
//! scale. A rule stops the first time its statistic reaches its threshold.
//! [`Monitor`] turns raw observations into the increments a rule asks for.

mod cusum;
mod devices;
mod glr;
pub mod logspace;
mod mixture;
mod scalable;
mod spec;

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{SensorModel, Subset};

pub use cusum::{CusumState, OracleCusum};
pub use devices::{OneSidedSprt, ShiryaevRoberts};
pub use glr::{GlrCusum, TopLForm, TopLGlr};
pub use mixture::{shat_threshold, SbarMixture, ShatMixture, StildeMixture, XieSiegmund};
pub use scalable::{MixturePi, SumTopL};
pub use spec::{ClassSpec, ClassSpecKind, DetectorSpec};

/// Increments a rule consumes each step.
#[derive(Debug, Clone, PartialEq)]
pub enum Channels {
    /// One increment `ℓ_t^k` per sensor; requires a factorizing model.
    Sensors(usize),
    /// One increment `ℓ_t^A` per listed subset.
    Subsets(Vec<Subset>),
}

impl Channels {
    pub fn len(&self) -> usize {
        match self {
            Channels::Sensors(k) => *k,
            Channels::Subsets(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub trait StoppingRule: Send + Sync + fmt::Debug {
    fn label(&self) -> String;

    fn channels(&self) -> &Channels;

    /// Threshold on the log-scale statistic.
    fn threshold(&self) -> f64;

    /// Changes the threshold; the statistic itself does not depend on it.
    fn set_threshold(&mut self, threshold: f64);

    /// Consumes one step of increments and returns the updated statistic.
    fn update(&mut self, increments: &[f64]) -> f64;

    fn reset(&mut self);

    /// Subset blamed for the latest statistic value, when the rule identifies one.
    fn implicated(&self) -> Option<Subset> {
        None
    }

    /// `false` for rules whose windowing changes the stopping time.
    fn is_exact(&self) -> bool {
        true
    }

    fn clone_box(&self) -> Box<dyn StoppingRule>;
}

impl Clone for Box<dyn StoppingRule> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Outcome of one monitored path.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub stopped: bool,
    /// Stopping time, or the last time observed when censored.
    pub time: u64,
    pub statistic: f64,
    pub implicated_subset: Option<Subset>,
    /// The horizon was reached without an alarm.
    pub censored: bool,
}

/// Feeds increments through `rule` until it stops or the increments run out.
pub fn run_on_increments<'a, I>(rule: &mut dyn StoppingRule, increments: I) -> Result<Verdict>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut t = 0;
    let mut stat = f64::NEG_INFINITY;
    for inc in increments {
        if inc.len() != rule.channels().len() {
            return Err(Error::Contract(format!("expected {} increments, got {}", rule.channels().len(), inc.len())));
        }
        if inc.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("increment"));
        }
        t += 1;
        stat = rule.update(inc);
        if stat >= rule.threshold() {
            return Ok(Verdict {
                stopped: true,
                time: t,
                statistic: stat,
                implicated_subset: rule.implicated(),
                censored: false,
            });
        }
    }
    Ok(Verdict { stopped: false, time: t, statistic: stat, implicated_subset: None, censored: true })
}

/// Runs a stopping rule on raw observations from a sensor model.
#[derive(Debug)]
pub struct Monitor<'m> {
    model: &'m dyn SensorModel,
    rule: Box<dyn StoppingRule>,
    increments: Vec<f64>,
    t: u64,
    last: f64,
}

impl<'m> Monitor<'m> {
    pub fn new(model: &'m dyn SensorModel, rule: Box<dyn StoppingRule>) -> Result<Self> {
        match rule.channels() {
            Channels::Sensors(k) => {
                if !model.is_independent() {
                    return Err(Error::Contract(format!(
                        "{} needs per-sensor increments; the model does not factorize",
                        rule.label()
                    )));
                }
                if *k != model.sensors() {
                    return Err(Error::Contract(format!(
                        "{} expects {k} sensors, model has {}",
                        rule.label(),
                        model.sensors()
                    )));
                }
            }
            Channels::Subsets(list) => {
                for &a in list {
                    model.check_subset(a)?;
                }
            }
        }
        let n = rule.channels().len();
        Ok(Monitor { model, rule, increments: vec![0.0; n], t: 0, last: f64::NEG_INFINITY })
    }

    pub fn rule(&self) -> &dyn StoppingRule {
        self.rule.as_ref()
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    pub fn statistic(&self) -> f64 {
        self.last
    }

    pub fn reset(&mut self) {
        self.rule.reset();
        self.t = 0;
        self.last = f64::NEG_INFINITY;
    }

    /// Processes `X_{t+1}`; returns the verdict if the rule stops now.
    pub fn observe(&mut self, x: &[f64]) -> Result<Option<Verdict>> {
        if x.len() != self.model.sensors() {
            return Err(Error::Contract(format!(
                "observation has dimension {}, model has {} sensors",
                x.len(),
                self.model.sensors()
            )));
        }
        let n = self.rule.channels().len();
        match self.rule.channels() {
            Channels::Sensors(_) => {
                self.model.sensor_llrs(x, &mut self.increments[..n]);
            }
            Channels::Subsets(list) => {
                self.model.subset_llrs(x, list, &mut self.increments[..n]);
            }
        }
        if self.increments[..n].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("increment"));
        }
        self.t += 1;
        self.last = self.rule.update(&self.increments[..n]);
        if self.last >= self.rule.threshold() {
            Ok(Some(Verdict {
                stopped: true,
                time: self.t,
                statistic: self.last,
                implicated_subset: self.rule.implicated(),
                censored: false,
            }))
        } else {
            Ok(None)
        }
    }

    /// Runs from the current state until the rule stops or `observations` run out.
    pub fn run<'x, I>(&mut self, observations: I) -> Result<Verdict>
    where
        I: IntoIterator<Item = &'x [f64]>,
    {
        for x in observations {
            if let Some(v) = self.observe(x)? {
                return Ok(v);
            }
        }
        Ok(self.censored())
    }

    /// Verdict for a path that ended without an alarm.
    pub fn censored(&self) -> Verdict {
        Verdict { stopped: false, time: self.t, statistic: self.last, implicated_subset: None, censored: true }
    }
}

pub(crate) fn check_threshold(b: f64) -> Result<()> {
    if b.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("threshold"))
    }
}

pub(crate) fn check_pi(pi: f64, allow_one: bool) -> Result<()> {
    let ok = pi > 0.0 && (pi < 1.0 || (allow_one && pi == 1.0));
    if ok {
        Ok(())
    } else if allow_one {
        Err(Error::Contract(format!("π = {pi} must lie in (0, 1]")))
    } else {
        Err(Error::Contract(format!("π = {pi} must lie in (0, 1)")))
    }
}

/// Sum of the `l` largest entries of `values`.
pub(crate) fn top_sum(values: &[f64], l: usize, scratch: &mut [f64]) -> f64 {
    let buf = &mut scratch[..values.len()];
    buf.copy_from_slice(values);
    if l < buf.len() {
        buf.select_nth_unstable_by(l, |a, b| b.total_cmp(a));
    }
    buf[..l].iter().sum()
}
