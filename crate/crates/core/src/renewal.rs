//! Renewal-theoretic constants for Gaussian log-likelihood-ratio random walks
//! and the multichart CUSUM threshold design built on them.
//!
//! For `h = N(0,1)`, `g = N(θ,1)` the increment `θx − θ²/2` is `N(θ²/2, θ²)`
//! after the change. With `c_n = |θ|√n/2`:
//!
//! - `β = −Σ_n [ (|θ|/√n) φ(c_n) − (θ²/2) Φ(−c_n) ]`, the expected infimum of the walk;
//! - `ρ = (1 + θ²/4) + β`, the limiting expected overshoot, since
//!   `E[Z₁²] / (2I) = 1 + θ²/4`;
//! - `δ = (2/θ²) exp(−2 Σ_n Φ(−c_n)/n)`, the Laplace transform of the limiting overshoot at 1.
//!
//! The normal tail is `Φ(−c) = erfc(c/√2)/2` using the libm `erfc`, a
//! correctly-rounded-in-practice port of the FreeBSD msun implementation, so
//! the constants are reproducible bit for bit across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Subset;

const SERIES_TOL: f64 = 1e-16;
const SERIES_MIN_TERMS: usize = 100;
const SERIES_MAX_TERMS: usize = 1_000_000;

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn check_theta(theta: f64) -> Result<f64> {
    if theta.is_finite() && theta != 0.0 {
        Ok(theta.abs())
    } else {
        Err(Error::InvalidModel(format!("theta = {theta} must be finite and nonzero")))
    }
}

/// `Σ_{n≥1} term(n)`, stopping once `|term| < 1e-16` with at least 100 terms.
fn series(theta: f64, term: impl Fn(f64) -> f64) -> Result<f64> {
    let mut sum = 0.0;
    for n in 1..=SERIES_MAX_TERMS {
        let t = term(n as f64);
        sum += t;
        if n >= SERIES_MIN_TERMS && t.abs() < SERIES_TOL {
            return Ok(sum);
        }
    }
    Err(Error::SeriesDivergence { theta, terms: SERIES_MAX_TERMS })
}

/// Expected infimum `β ≤ 0` of the post-change LLR walk.
pub fn gaussian_beta(theta: f64) -> Result<f64> {
    let th = check_theta(theta)?;
    let s = series(theta, |n| {
        let c = th * n.sqrt() / 2.0;
        th / n.sqrt() * normal_pdf(c) - th * th / 2.0 * normal_cdf(-c)
    })?;
    Ok(-s)
}

/// Laplace transform `δ ∈ (0, 1)` of the limiting overshoot.
pub fn gaussian_delta(theta: f64) -> Result<f64> {
    let th = check_theta(theta)?;
    let s = series(theta, |n| -2.0 / n * normal_cdf(-th * n.sqrt() / 2.0))?;
    let delta = 2.0 / (th * th) * s.exp();
    if delta > 0.0 && delta < 1.0 {
        Ok(delta)
    } else {
        Err(Error::SeriesDivergence { theta, terms: 0 })
    }
}

/// Limiting expected overshoot `ρ = 1 + θ²/4 + β`.
pub fn gaussian_rho(theta: f64) -> Result<f64> {
    let th = check_theta(theta)?;
    Ok(1.0 + th * th / 4.0 + gaussian_beta(theta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalConstants {
    pub theta: f64,
    pub rho: f64,
    pub beta: f64,
    pub delta: f64,
}

impl RenewalConstants {
    pub fn gaussian(theta: f64) -> Result<Self> {
        let beta = gaussian_beta(theta)?;
        let th = theta.abs();
        Ok(RenewalConstants { theta, rho: 1.0 + th * th / 4.0 + beta, beta, delta: gaussian_delta(theta)? })
    }

    /// Constants of the summed increment over `subset` for independent
    /// Gaussian sensors: again Gaussian, with shift `√(Σ_{k∈A} θ_k²)`.
    pub fn aggregate(thetas: &[f64], subset: Subset) -> Result<Self> {
        if subset.is_empty() || subset.span() > thetas.len() {
            return Err(Error::Contract(format!("subset {subset} outside 1..={}", thetas.len())));
        }
        let eff = subset.indices().map(|k| thetas[k] * thetas[k]).sum::<f64>().sqrt();
        Self::gaussian(eff)
    }

    /// KL number `I = θ²/2`.
    pub fn info(&self) -> f64 {
        self.theta * self.theta / 2.0
    }

    /// `E[Z₁²] / (2I)` under the post-change law.
    pub fn second_moment_ratio(&self) -> f64 {
        1.0 + self.theta * self.theta / 4.0
    }

    /// `I δ²`, the factor governing the false-alarm rate of a single chart.
    pub fn info_delta2(&self) -> f64 {
        self.info() * self.delta * self.delta
    }

    /// Delay approximation `(b + ρ + β) / I` for a CUSUM at threshold `b`.
    pub fn delay(&self, b: f64) -> f64 {
        (b + self.rho + self.beta) / self.info()
    }
}

pub fn gaussian_constants(thetas: &[f64]) -> Result<Vec<RenewalConstants>> {
    thetas.iter().map(|&t| RenewalConstants::gaussian(t)).collect()
}

/// How multichart thresholds are assigned across sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSpec {
    /// `p_k = 1/K`: identical thresholds.
    Uniform,
    /// `p_k ∝ (I_k δ_k²)^{-1}`: equalizes the relative loss across sensors.
    Equalizing,
    /// `p_k ∝ e^{ρ_k + β_k}`: equalizes `I_k J_k`.
    ExpRhoBeta,
    /// `p_k ∝ 1/I_k`.
    InverseInfo,
    /// `b_k = c_γ I_k`, with `c_γ` set by the false-alarm approximation.
    ProportionalToInfo,
}

impl ThresholdSpec {
    pub const WEIGHTED: [ThresholdSpec; 4] =
        [ThresholdSpec::Uniform, ThresholdSpec::Equalizing, ThresholdSpec::ExpRhoBeta, ThresholdSpec::InverseInfo];

    pub fn name(self) -> &'static str {
        match self {
            ThresholdSpec::Uniform => "uniform",
            ThresholdSpec::Equalizing => "equalizing",
            ThresholdSpec::ExpRhoBeta => "exp_rho_beta",
            ThresholdSpec::InverseInfo => "inverse_info",
            ThresholdSpec::ProportionalToInfo => "proportional_to_info",
        }
    }

    /// Normalized `p_k`; `None` for [`ThresholdSpec::ProportionalToInfo`].
    pub fn weights(self, consts: &[RenewalConstants]) -> Option<Vec<f64>> {
        let raw: Vec<f64> = match self {
            ThresholdSpec::Uniform => vec![1.0; consts.len()],
            ThresholdSpec::Equalizing => consts.iter().map(|c| 1.0 / c.info_delta2()).collect(),
            ThresholdSpec::ExpRhoBeta => consts.iter().map(|c| (c.rho + c.beta).exp()).collect(),
            ThresholdSpec::InverseInfo => consts.iter().map(|c| 1.0 / c.info()).collect(),
            ThresholdSpec::ProportionalToInfo => return None,
        };
        let total: f64 = raw.iter().sum();
        Some(raw.into_iter().map(|w| w / total).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultichartDesign {
    pub spec: ThresholdSpec,
    pub gamma: f64,
    /// Per-sensor thresholds `b_k`.
    pub thresholds: Vec<f64>,
    /// `p_k`, for the weighted specs.
    pub weights: Option<Vec<f64>>,
    /// Common `b` with `b_k = b − log p_k`, for the weighted specs.
    pub b: Option<f64>,
    /// `c_γ` with `b_k = c_γ I_k`, for the proportional spec.
    pub c_gamma: Option<f64>,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 1.0 {
        Ok(())
    } else {
        Err(Error::Contract(format!("target ARL γ = {gamma} must exceed 1")))
    }
}

/// Thresholds for the multichart CUSUM `min_k inf{t : Y_t^k ≥ b_k}` with
/// `E_∞ ≈ γ` under `E_∞ ≈ 1 / Σ_k e^{−b_k} I_k δ_k²`.
pub fn multichart_design(consts: &[RenewalConstants], spec: ThresholdSpec, gamma: f64) -> Result<MultichartDesign> {
    check_gamma(gamma)?;
    if consts.is_empty() {
        return Err(Error::Contract("no sensors".into()));
    }
    match spec.weights(consts) {
        Some(p) => {
            let b = gamma.ln() + p.iter().zip(consts).map(|(p, c)| p * c.info_delta2()).sum::<f64>().ln();
            let thresholds = p.iter().map(|p| b - p.ln()).collect();
            Ok(MultichartDesign { spec, gamma, thresholds, weights: Some(p), b: Some(b), c_gamma: None })
        }
        None => {
            let c = solve_c_gamma(consts, gamma)?;
            let thresholds = consts.iter().map(|k| c * k.info()).collect();
            Ok(MultichartDesign { spec, gamma, thresholds, weights: None, b: None, c_gamma: Some(c) })
        }
    }
}

/// Root of `Σ_k e^{−c I_k} I_k δ_k² = 1/γ`, by bisection on `[0, 10 log γ / min I]`.
pub fn solve_c_gamma(consts: &[RenewalConstants], gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let log_gamma = gamma.ln();
    // log Σ e^{−c I_k} I_k δ_k² + log γ, decreasing in c
    let f = |c: f64| {
        crate::detectors::logspace::log_sum_exp(consts.iter().map(|k| -c * k.info() + k.info_delta2().ln())) + log_gamma
    };
    let min_info = consts.iter().map(|k| k.info()).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0, 10.0 * log_gamma / min_info);
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo >= 0.0 && fhi <= 0.0) {
        return Err(Error::Bracket(format!("c_gamma not bracketed by [{lo}, {hi}]: f = ({flo}, {fhi})")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `C_k(p) = log( Σ_j p_j I_j δ_j² / (p_k I_k δ_k²) )` for every `k`.
pub fn loss_constants(consts: &[RenewalConstants], p: &[f64]) -> Vec<f64> {
    let total: f64 = p.iter().zip(consts).map(|(p, c)| p * c.info_delta2()).sum();
    p.iter().zip(consts).map(|(p, c)| (total / (p * c.info_delta2())).ln()).collect()
}

/// Delay approximation for the single-sensor CUSUM calibrated to `γ`:
/// `(log γ + log(I δ²) + ρ + β) / I`.
pub fn oracle_delay(c: &RenewalConstants, gamma: f64) -> f64 {
    c.delay(gamma.ln() + c.info_delta2().ln())
}

/// Relative loss `J̄_k = (J_k − J_k^*) / J_k^*` of the multichart design when
/// sensor `k` alone changes, from the delay approximation.
pub fn relative_loss_curve(consts: &[RenewalConstants], spec: ThresholdSpec, gamma: f64) -> Result<Vec<f64>> {
    let design = multichart_design(consts, spec, gamma)?;
    Ok(match &design.weights {
        // C_k / (log γ + ρ_k + β_k + log(I_k δ_k²))
        Some(p) => loss_constants(consts, p)
            .into_iter()
            .zip(consts)
            .map(|(ck, c)| ck / (gamma.ln() + c.rho + c.beta + c.info_delta2().ln()))
            .collect(),
        None => consts
            .iter()
            .zip(&design.thresholds)
            .map(|(c, &bk)| {
                let star = oracle_delay(c, gamma);
                (c.delay(bk) - star) / star
            })
            .collect(),
    })
}

/// `J_k / (log γ / I_k)` under `b_k = c_γ I_k`; tends to `I_k / min_j I_j`.
pub fn proportional_delay_ratios(consts: &[RenewalConstants], gamma: f64) -> Result<Vec<f64>> {
    let c = solve_c_gamma(consts, gamma)?;
    Ok(consts.iter().map(|k| k.delay(c * k.info()) / (gamma.ln() / k.info())).collect())
}

/// One row of the relative-loss figure for two sensors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossPoint {
    pub theta2: f64,
    pub spec: ThresholdSpec,
    pub loss1: f64,
    pub loss2: f64,
}

/// Relative losses for `θ₁` fixed and `θ₂` over `grid`, for every spec in `specs`.
pub fn relative_loss_figure(theta1: f64, grid: &[f64], specs: &[ThresholdSpec], gamma: f64) -> Result<Vec<LossPoint>> {
    let c1 = RenewalConstants::gaussian(theta1)?;
    let mut out = Vec::with_capacity(grid.len() * specs.len());
    for &spec in specs {
        for &theta2 in grid {
            let consts = [c1, RenewalConstants::gaussian(theta2)?];
            let loss = relative_loss_curve(&consts, spec, gamma)?;
            out.push(LossPoint { theta2, spec, loss1: loss[0], loss2: loss[1] });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_functions() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-15);
        assert!((normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
        // tail keeps relative accuracy
        assert!((normal_cdf(-10.0) / 7.619853024160527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn c_argument() {
        // θ = 2, n = 1 gives c = 1
        let theta: f64 = 2.0;
        assert_eq!(theta * 1f64.sqrt() / 2.0, 1.0);
    }

    #[test]
    fn theta_zero_rejected() {
        assert!(gaussian_beta(0.0).is_err());
        assert!(gaussian_delta(f64::NAN).is_err());
        assert!(gaussian_rho(0.0).is_err());
    }

    #[test]
    fn delta_in_unit_interval() {
        for th in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let d = gaussian_delta(th).unwrap();
            assert!(d > 0.0 && d < 1.0, "{th}: {d}");
        }
    }

    #[test]
    fn beta_increases_to_zero() {
        let grid = [0.5, 1.0, 2.0, 4.0];
        let betas: Vec<f64> = grid.iter().map(|&t| gaussian_beta(t).unwrap()).collect();
        assert!(betas.iter().all(|&b| b <= 0.0));
        assert!(betas.windows(2).all(|w| w[0] < w[1]), "{betas:?}");
    }

    #[test]
    fn sign_of_theta_irrelevant() {
        assert_eq!(RenewalConstants::gaussian(-1.5).unwrap().rho, RenewalConstants::gaussian(1.5).unwrap().rho);
    }

    #[test]
    fn constants_are_deterministic() {
        let a = RenewalConstants::gaussian(0.7).unwrap();
        let b = RenewalConstants::gaussian(0.7).unwrap();
        assert_eq!(a.rho.to_bits(), b.rho.to_bits());
        assert_eq!(a.delta.to_bits(), b.delta.to_bits());
    }

    #[test]
    fn single_sensor_design() {
        let c = RenewalConstants::gaussian(1.0).unwrap();
        let d = multichart_design(&[c], ThresholdSpec::Uniform, 1e3).unwrap();
        assert!((d.thresholds[0] - (1e3f64.ln() + c.info_delta2().ln())).abs() < 1e-14);
    }

    #[test]
    fn symmetric_sensors_get_equal_thresholds() {
        let consts = gaussian_constants(&[1.0, 1.0, 1.0]).unwrap();
        for spec in ThresholdSpec::WEIGHTED.into_iter().chain([ThresholdSpec::ProportionalToInfo]) {
            let d = multichart_design(&consts, spec, 1e3).unwrap();
            assert!(d.thresholds.iter().all(|&b| (b - d.thresholds[0]).abs() < 1e-12), "{spec:?}");
        }
    }

    #[test]
    fn equalizing_gives_log_k() {
        let consts = gaussian_constants(&[1.0, 0.4, 2.5]).unwrap();
        let p = ThresholdSpec::Equalizing.weights(&consts).unwrap();
        for c in loss_constants(&consts, &p) {
            assert!((c - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn c_gamma_solves_the_arl_equation() {
        let consts = gaussian_constants(&[1.0, 2.0]).unwrap();
        let c = solve_c_gamma(&consts, 1e4).unwrap();
        let arl = 1.0 / consts.iter().map(|k| (-c * k.info()).exp() * k.info_delta2()).sum::<f64>();
        assert!((arl / 1e4 - 1.0).abs() < 1e-10);
        assert!(solve_c_gamma(&consts, 1.0).is_err());
    }

    #[test]
    fn proportional_design_matches_arl_approximation() {
        let consts = gaussian_constants(&[1.0, 2.0]).unwrap();
        let d = multichart_design(&consts, ThresholdSpec::ProportionalToInfo, 1e3).unwrap();
        let arl = 1.0 / consts.iter().zip(&d.thresholds).map(|(k, b)| (-b).exp() * k.info_delta2()).sum::<f64>();
        assert!((arl / 1e3 - 1.0).abs() < 1e-10);
    }
}
