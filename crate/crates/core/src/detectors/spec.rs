//! Serializable detector descriptions, as read from experiment configs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassKind, SensorModel, Subset, SubsetClass, WeightSpec};
use crate::windows::WindowRule;

use super::{
    GlrCusum, MixturePi, OneSidedSprt, OracleCusum, SbarMixture, ShatMixture, ShiryaevRoberts, StildeMixture,
    StoppingRule, SumTopL, TopLForm, TopLGlr, XieSiegmund,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassSpecKind {
    Exactly,
    AtMost,
    Explicit,
}

/// A subset class in config form. Sensor labels are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub kind: ClassSpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    /// Weight parameter for `p_A ∝ p^|A|`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sensor: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsets: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ClassSpec {
    pub fn at_most(l: usize) -> Self {
        ClassSpec { kind: ClassSpecKind::AtMost, l: Some(l), p: None, per_sensor: None, subsets: None, weights: None }
    }

    pub fn exactly(l: usize) -> Self {
        ClassSpec { kind: ClassSpecKind::Exactly, ..Self::at_most(l) }
    }

    pub fn build(&self, sensors: usize) -> Result<SubsetClass> {
        let need_l = || self.l.ok_or_else(|| Error::Contract("class needs `l`".into()));
        let kind = match self.kind {
            ClassSpecKind::Exactly => ClassKind::Exactly(need_l()?),
            ClassSpecKind::AtMost => ClassKind::AtMost(need_l()?),
            ClassSpecKind::Explicit => {
                let lists =
                    self.subsets.as_ref().ok_or_else(|| Error::Contract("explicit class needs `subsets`".into()))?;
                ClassKind::Explicit(lists.iter().map(|s| Subset::from_labels(s)).collect::<Result<Vec<_>>>()?)
            }
        };
        let chosen = [self.p.is_some(), self.per_sensor.is_some(), self.weights.is_some()];
        if chosen.iter().filter(|&&c| c).count() > 1 {
            return Err(Error::Contract("give at most one of `p`, `per_sensor`, `weights`".into()));
        }
        let weights = if let Some(ps) = &self.per_sensor {
            WeightSpec::PerSensor(ps.clone())
        } else if let Some(ws) = &self.weights {
            WeightSpec::Explicit(ws.clone())
        } else {
            WeightSpec::Power(self.p.unwrap_or(1.0))
        };
        SubsetClass::new(sensors, kind, weights)
    }
}

/// A stopping rule without its threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectorSpec {
    /// CUSUM that knows the affected subset (1-based labels).
    Oracle {
        affected: Vec<usize>,
    },
    /// Brute-force GLR-CUSUM over an enumerated class.
    Glr {
        class: ClassSpec,
    },
    /// Order-statistic GLR-CUSUM for `P_L` (`p` absent) or `P̄_L` with weight parameter `p`.
    GlrTopL {
        l: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<f64>,
        #[serde(default)]
        window: WindowRule,
    },
    Sbar {
        class: ClassSpec,
        #[serde(default)]
        window: WindowRule,
    },
    Stilde {
        class: ClassSpec,
    },
    Shat {
        pi: f64,
        #[serde(default)]
        window: WindowRule,
    },
    XieSiegmund {
        pi: f64,
        #[serde(default)]
        window: WindowRule,
    },
    SumTopL {
        l: usize,
    },
    MixturePi {
        pi: f64,
    },
    ShiryaevRoberts {
        class: ClassSpec,
    },
    Sprt {
        pi: f64,
    },
}

impl DetectorSpec {
    pub fn build(&self, model: &dyn SensorModel, threshold: f64) -> Result<Box<dyn StoppingRule>> {
        let k = model.sensors();
        let need_independent = |name: &str| {
            if model.is_independent() {
                Ok(())
            } else {
                Err(Error::Contract(format!("{name} needs independent sensors")))
            }
        };
        Ok(match self {
            DetectorSpec::Oracle { affected } => {
                let a = Subset::from_labels(affected)?;
                model.check_subset(a)?;
                Box::new(OracleCusum::new(a, threshold)?)
            }
            DetectorSpec::Glr { class } => Box::new(GlrCusum::new(&class.build(k)?, threshold)?),
            DetectorSpec::GlrTopL { l, p, window } => {
                need_independent("order-statistic GLR")?;
                let form = match p {
                    None => TopLForm::Exactly(*l),
                    Some(p) => TopLForm::AtMost { l: *l, p: *p },
                };
                Box::new(TopLGlr::new(k, form, threshold, *window)?)
            }
            DetectorSpec::Sbar { class, window } => {
                Box::new(SbarMixture::for_class(&class.build(k)?, model.is_independent(), threshold, *window)?)
            }
            DetectorSpec::Stilde { class } => Box::new(StildeMixture::new(&class.build(k)?, threshold)?),
            DetectorSpec::Shat { pi, window } => {
                need_independent("Shat")?;
                Box::new(ShatMixture::new(k, *pi, threshold, *window)?)
            }
            DetectorSpec::XieSiegmund { pi, window } => {
                need_independent("Xie-Siegmund")?;
                Box::new(XieSiegmund::new(k, *pi, threshold, *window)?)
            }
            DetectorSpec::SumTopL { l } => {
                need_independent("SUM-CUSUM")?;
                Box::new(SumTopL::new(k, *l, threshold)?)
            }
            DetectorSpec::MixturePi { pi } => {
                need_independent("M(pi)")?;
                Box::new(MixturePi::new(k, *pi, threshold)?)
            }
            DetectorSpec::ShiryaevRoberts { class } => Box::new(ShiryaevRoberts::new(&class.build(k)?, threshold)?),
            DetectorSpec::Sprt { pi } => {
                need_independent("SPRT")?;
                Box::new(OneSidedSprt::new(k, *pi, threshold)?)
            }
        })
    }

    /// Short stable name for reports.
    pub fn label(&self) -> String {
        let class_label = |c: &ClassSpec| match c.kind {
            ClassSpecKind::Exactly => format!("P_{}", c.l.unwrap_or(0)),
            ClassSpecKind::AtMost => format!("Pbar_{}", c.l.unwrap_or(0)),
            ClassSpecKind::Explicit => format!("explicit{}", c.subsets.as_ref().map_or(0, Vec::len)),
        };
        let sigma = |w: &WindowRule| if w.is_exact() { "" } else { ",sigma" };
        match self {
            DetectorSpec::Oracle { affected } => format!("oracle(|A|={})", affected.len()),
            DetectorSpec::Glr { class } => format!("S({})", class_label(class)),
            DetectorSpec::GlrTopL { l, p: None, window } => format!("S_topL(P_{l}{})", sigma(window)),
            DetectorSpec::GlrTopL { l, p: Some(p), window } => {
                format!("S_topL(Pbar_{l},p={p}{})", sigma(window))
            }
            DetectorSpec::Sbar { class, window } => format!("Sbar({}{})", class_label(class), sigma(window)),
            DetectorSpec::Stilde { class } => format!("Stilde({})", class_label(class)),
            DetectorSpec::Shat { pi, window } => format!("Shat({pi}{})", sigma(window)),
            DetectorSpec::XieSiegmund { pi, window } => format!("Scheck({pi}{})", sigma(window)),
            DetectorSpec::SumTopL { l } => format!("M({l})"),
            DetectorSpec::MixturePi { pi } => format!("M(pi={pi})"),
            DetectorSpec::ShiryaevRoberts { class } => format!("SR({})", class_label(class)),
            DetectorSpec::Sprt { pi } => format!("SPRT({pi})"),
        }
    }

    /// `log |P|` of the class the rule ranges over; 0 for rules without one.
    pub fn log_class_size(&self, sensors: usize) -> Result<f64> {
        let size = match self {
            DetectorSpec::Glr { class }
            | DetectorSpec::Sbar { class, .. }
            | DetectorSpec::Stilde { class }
            | DetectorSpec::ShiryaevRoberts { class } => class.build(sensors)?.cardinality(),
            DetectorSpec::GlrTopL { l, p: None, .. } => crate::model::binomial(sensors, *l),
            DetectorSpec::GlrTopL { l, p: Some(_), .. } => (1..=*l).map(|j| crate::model::binomial(sensors, j)).sum(),
            DetectorSpec::Shat { .. } | DetectorSpec::XieSiegmund { .. } | DetectorSpec::MixturePi { .. } => {
                (1u128 << sensors) - 1
            }
            DetectorSpec::SumTopL { .. } | DetectorSpec::Oracle { .. } | DetectorSpec::Sprt { .. } => 1,
        };
        Ok((size as f64).ln())
    }

    /// Rules whose window shortcut changes the stopping time.
    pub fn is_exact(&self) -> bool {
        match self {
            DetectorSpec::GlrTopL { window, .. }
            | DetectorSpec::Sbar { window, .. }
            | DetectorSpec::Shat { window, .. }
            | DetectorSpec::XieSiegmund { window, .. } => window.is_exact(),
            _ => true,
        }
    }
}
