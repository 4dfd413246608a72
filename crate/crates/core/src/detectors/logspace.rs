//! Log-space arithmetic for mixture statistics.

/// `log(e^a + e^b)`, exact for infinite arguments.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `log Σ e^{x_i}`; `-∞` for an empty input.
pub fn log_sum_exp<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    let mut acc = 0.0;
    // streaming form: acc = Σ e^{x_i - hi}
    for x in xs {
        if x == f64::NEG_INFINITY {
            continue;
        }
        if x > hi {
            acc = acc * (hi - x).exp() + 1.0;
            hi = x;
        } else {
            acc += (x - hi).exp();
        }
    }
    if hi == f64::NEG_INFINITY {
        hi
    } else {
        hi + acc.ln()
    }
}

/// `log(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Two-point mixture `log(1 − π + π e^x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliMix {
    pi: f64,
    ln_stay: f64,
    ln_pi: f64,
}

impl BernoulliMix {
    /// Requires `0 < π ≤ 1`; `π = 1` gives the identity `x ↦ x`.
    pub fn new(pi: f64) -> Self {
        BernoulliMix { pi, ln_stay: (1.0 - pi).ln(), ln_pi: pi.ln() }
    }

    /// Exactly 0 at `x = 0` and never negative for `x ≥ 0`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if self.pi == 1.0 {
            x
        } else if x < 30.0 {
            (self.pi * x.exp_m1()).ln_1p()
        } else {
            log_add_exp(self.ln_stay, self.ln_pi + x)
        }
    }
}
