//! Sensor subsets and the classes of candidate affected subsets.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest sensor count a [`Subset`] bitmask can hold.
pub const MAX_SENSORS: usize = 32;

/// Largest sensor count for which classes are enumerated member by member.
pub const MAX_ENUMERABLE_SENSORS: usize = 25;

/// Hard cap on the number of members a brute-force detector may carry.
pub const MAX_CLASS_MEMBERS: u128 = 1 << 20;

/// A nonempty set of sensors, stored as a bitmask over 0-based sensor indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Subset(u32);

impl Subset {
    pub fn from_bits(bits: u32) -> Self {
        Subset(bits)
    }

    /// Builds a subset from 0-based sensor indices.
    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut bits = 0u32;
        for k in indices {
            if k >= MAX_SENSORS {
                return Err(Error::Contract(format!("sensor index {k} out of range")));
            }
            bits |= 1 << k;
        }
        if bits == 0 {
            return Err(Error::Contract("empty subset".into()));
        }
        Ok(Subset(bits))
    }

    /// Builds a subset from 1-based sensor labels, as used in configs and reports.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        if labels.contains(&0) {
            return Err(Error::Contract("sensor labels are 1-based".into()));
        }
        Self::from_indices(labels.iter().map(|&l| l - 1))
    }

    /// The first `n` sensors.
    pub fn first(n: usize) -> Result<Self> {
        Self::from_indices(0..n)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, k: usize) -> bool {
        k < MAX_SENSORS && self.0 & (1 << k) != 0
    }

    /// Highest sensor index plus one.
    pub fn span(self) -> usize {
        (MAX_SENSORS as u32 - self.0.leading_zeros()) as usize
    }

    /// 0-based sensor indices in increasing order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let k = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(k)
            }
        })
    }

    /// 1-based labels.
    pub fn labels(self) -> Vec<usize> {
        self.indices().map(|k| k + 1).collect()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.labels().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

/// How a class chooses its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassKind {
    /// All subsets with exactly `L` sensors.
    Exactly(usize),
    /// All nonempty subsets with at most `L` sensors.
    AtMost(usize),
    /// An explicit member list.
    Explicit(Vec<Subset>),
}

/// How member weights are assigned before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    /// `p_A ∝ p^|A|`.
    Power(f64),
    /// `p_A ∝ Π_{k∈A} p_k`.
    PerSensor(Vec<f64>),
    /// One positive weight per member, in enumeration order.
    Explicit(Vec<f64>),
}

/// A class of candidate affected subsets over `K` sensors, with normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetClass {
    sensors: usize,
    kind: ClassKind,
    weights: WeightSpec,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl SubsetClass {
    pub fn new(sensors: usize, kind: ClassKind, weights: WeightSpec) -> Result<Self> {
        if sensors == 0 || sensors > MAX_SENSORS {
            return Err(Error::Contract(format!("sensor count {sensors} outside 1..={MAX_SENSORS}")));
        }
        match &kind {
            ClassKind::Exactly(l) | ClassKind::AtMost(l) => {
                if *l == 0 || *l > sensors {
                    return Err(Error::Contract(format!("L = {l} outside 1..={sensors}")));
                }
            }
            ClassKind::Explicit(list) => {
                if list.is_empty() {
                    return Err(Error::Contract("explicit class has no members".into()));
                }
                for a in list {
                    if a.is_empty() || a.span() > sensors {
                        return Err(Error::Contract(format!("member {a} not a nonempty subset of 1..={sensors}")));
                    }
                }
                let mut sorted = list.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != list.len() {
                    return Err(Error::Contract("explicit class repeats a member".into()));
                }
            }
        }
        match &weights {
            WeightSpec::Power(p) => {
                if !(p.is_finite() && *p > 0.0) {
                    return Err(Error::Contract(format!("weight parameter p = {p} must be positive")));
                }
            }
            WeightSpec::PerSensor(ps) => {
                if ps.len() != sensors || ps.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
                    return Err(Error::Contract("per-sensor weights need one positive value per sensor".into()));
                }
            }
            WeightSpec::Explicit(ws) => {
                let ClassKind::Explicit(list) = &kind else {
                    return Err(Error::Contract("explicit weights require an explicit member list".into()));
                };
                if ws.len() != list.len() || ws.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::Contract("explicit weights need one positive value per member".into()));
                }
            }
        }
        Ok(SubsetClass { sensors, kind, weights })
    }

    /// `P_L` with weights `p_A ∝ p^|A|` (uniform within the class).
    pub fn exactly(sensors: usize, l: usize) -> Result<Self> {
        Self::new(sensors, ClassKind::Exactly(l), WeightSpec::Power(1.0))
    }

    /// `P̄_L` with weights `p_A ∝ p^|A|`.
    pub fn at_most(sensors: usize, l: usize, p: f64) -> Result<Self> {
        Self::new(sensors, ClassKind::AtMost(l), WeightSpec::Power(p))
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn kind(&self) -> &ClassKind {
        &self.kind
    }

    pub fn weight_spec(&self) -> &WeightSpec {
        &self.weights
    }

    /// `|P|`, computed from binomial identities without enumerating.
    pub fn cardinality(&self) -> u128 {
        match &self.kind {
            ClassKind::Exactly(l) => binomial(self.sensors, *l),
            ClassKind::AtMost(l) => (1..=*l).map(|j| binomial(self.sensors, j)).sum(),
            ClassKind::Explicit(list) => list.len() as u128,
        }
    }

    /// Members in deterministic order: by size, then lexicographically by sensor label.
    /// Explicit classes keep their given order.
    pub fn enumerate(&self) -> Result<Vec<Subset>> {
        let members = self.cardinality();
        let limit = MAX_CLASS_MEMBERS;
        if members > limit || self.sensors > MAX_ENUMERABLE_SENSORS {
            return Err(Error::Capacity { members, limit });
        }
        Ok(match &self.kind {
            ClassKind::Exactly(l) => combinations(self.sensors, *l),
            ClassKind::AtMost(l) => (1..=*l).flat_map(|j| combinations(self.sensors, j)).collect(),
            ClassKind::Explicit(list) => list.clone(),
        })
    }

    /// Normalized weights `p_A`, aligned with [`enumerate`](Self::enumerate).
    pub fn weights(&self) -> Result<Vec<f64>> {
        let members = self.enumerate()?;
        let raw: Vec<f64> = match &self.weights {
            WeightSpec::Power(p) => members.iter().map(|a| p.powi(a.len() as i32)).collect(),
            WeightSpec::PerSensor(ps) => members.iter().map(|a| a.indices().map(|k| ps[k]).product()).collect(),
            WeightSpec::Explicit(ws) => ws.clone(),
        };
        let total: f64 = raw.iter().sum();
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    /// Log weights `log p_A`, aligned with [`enumerate`](Self::enumerate).
    pub fn log_weights(&self) -> Result<Vec<f64>> {
        Ok(self.weights()?.into_iter().map(f64::ln).collect())
    }

    /// `C(P) = Σ_B p^|B|` for power weights on `P_L` or `P̄_L`; `None` otherwise.
    pub fn power_normalizer(&self) -> Option<f64> {
        let WeightSpec::Power(p) = self.weights else {
            return None;
        };
        match self.kind {
            ClassKind::Exactly(l) => Some(binomial(self.sensors, l) as f64 * p.powi(l as i32)),
            ClassKind::AtMost(l) => Some((1..=l).map(|j| binomial(self.sensors, j) as f64 * p.powi(j as i32)).sum()),
            ClassKind::Explicit(_) => None,
        }
    }
}

/// All `l`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, l: usize) -> Vec<Subset> {
    let mut out = Vec::with_capacity(binomial(n, l) as usize);
    let mut idx: Vec<usize> = (0..l).collect();
    loop {
        out.push(Subset(idx.iter().fold(0u32, |m, &k| m | (1 << k))));
        // advance to the next combination
        let mut i = l;
        while i > 0 && idx[i - 1] == n - l + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..l {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_two_of_five_has_ten_members() {
        let class = SubsetClass::exactly(5, 2).unwrap();
        assert_eq!(class.enumerate().unwrap().len(), 10);
        assert_eq!(class.cardinality(), 10);
    }

    #[test]
    fn at_most_five_of_five_has_thirty_one_members() {
        let class = SubsetClass::at_most(5, 5, 1.0).unwrap();
        assert_eq!(class.enumerate().unwrap().len(), 31);
    }

    #[test]
    fn at_most_two_of_three_order() {
        let class = SubsetClass::at_most(3, 2, 1.0).unwrap();
        let labels: Vec<Vec<usize>> = class.enumerate().unwrap().into_iter().map(|a| a.labels()).collect();
        assert_eq!(labels, vec![vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn large_class_hits_capacity() {
        let class = SubsetClass::at_most(30, 30, 1.0).unwrap();
        assert!(matches!(class.enumerate(), Err(Error::Capacity { .. })));
        assert_eq!(class.cardinality(), (1u128 << 30) - 1);
    }

    #[test]
    fn power_weights_normalize() {
        let class = SubsetClass::at_most(4, 3, 0.3).unwrap();
        let w = class.weights().unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let c = class.power_normalizer().unwrap();
        let members = class.enumerate().unwrap();
        for (a, wa) in members.iter().zip(&w) {
            assert!((wa - 0.3f64.powi(a.len() as i32) / c).abs() < 1e-15);
        }
    }

    #[test]
    fn per_sensor_weights_are_products() {
        let members = vec![
            Subset::from_labels(&[1]).unwrap(),
            Subset::from_labels(&[1, 2]).unwrap(),
            Subset::from_labels(&[3]).unwrap(),
        ];
        let class =
            SubsetClass::new(3, ClassKind::Explicit(members), WeightSpec::PerSensor(vec![0.5, 2.0, 1.0])).unwrap();
        let w = class.weights().unwrap();
        // raw weights 0.5, 1.0, 1.0
        assert!((w[0] - 0.2).abs() < 1e-15);
        assert!((w[1] - 0.4).abs() < 1e-15);
        assert!((w[2] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_classes() {
        assert!(SubsetClass::exactly(3, 0).is_err());
        assert!(SubsetClass::exactly(3, 4).is_err());
        assert!(SubsetClass::at_most(3, 2, 0.0).is_err());
        let out_of_range = Subset::from_labels(&[4]).unwrap();
        assert!(SubsetClass::new(3, ClassKind::Explicit(vec![out_of_range]), WeightSpec::Power(1.0)).is_err());
        assert!(Subset::from_indices(std::iter::empty()).is_err());
    }

    #[test]
    fn subset_display_and_indices() {
        let a = Subset::from_labels(&[2, 5]).unwrap();
        assert_eq!(a.to_string(), "{2,5}");
        assert_eq!(a.indices().collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(a.span(), 5);
    }
}
