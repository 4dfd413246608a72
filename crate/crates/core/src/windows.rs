//! Adaptive windows for statistics of the form `max_{0≤s≤t} G(Z_t − Z_s)`.
//!
//! When `G` is non-decreasing in every coordinate, any `s` before the last time
//! all coordinates sat at their running minimum can be dropped without changing
//! the maximum. [`WindowRule::Regeneration`] implements exactly that anchor.
//! [`WindowRule::Sigma`] advances the anchor only when every coordinate falls
//! strictly below its value at the previous anchor; it keeps shorter windows
//! but the resulting statistic is not equal to the full-history one.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowRule {
    /// Anchor at times `r_n` where every coordinate equals its running minimum.
    #[default]
    Regeneration,
    /// Anchor at times `σ_n` where every coordinate is strictly below its value at `σ_{n-1}`.
    Sigma,
}

impl WindowRule {
    /// `true` when windowed maximization equals the full-history maximum.
    pub fn is_exact(self) -> bool {
        matches!(self, WindowRule::Regeneration)
    }
}

/// Cumulative sums `Z_s` for `s` in `[anchor, t]`, stored relative to `Z_anchor`.
#[derive(Debug, Clone)]
pub struct RegenerationTracker {
    dim: usize,
    rule: WindowRule,
    entries: Vec<f64>,
    current: Vec<f64>,
    running_min: Vec<f64>,
    anchor: u64,
    t: u64,
}

impl RegenerationTracker {
    pub fn new(dim: usize, rule: WindowRule) -> Self {
        RegenerationTracker {
            dim,
            rule,
            entries: vec![0.0; dim],
            current: vec![0.0; dim],
            running_min: vec![0.0; dim],
            anchor: 0,
            t: 0,
        }
    }

    pub fn reset(&mut self) {
        self.entries.clear();
        self.entries.resize(self.dim, 0.0);
        self.current.fill(0.0);
        self.running_min.fill(0.0);
        self.anchor = 0;
        self.t = 0;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rule(&self) -> WindowRule {
        self.rule
    }

    /// Latest anchor `r(t)` (or `σ(t)`).
    pub fn anchor(&self) -> u64 {
        self.anchor
    }

    pub fn time(&self) -> u64 {
        self.t
    }

    /// Number of stored `Z_s` vectors, `t − anchor + 1`.
    pub fn window_len(&self) -> usize {
        self.entries.len() / self.dim.max(1)
    }

    /// `Z_t − Z_anchor`.
    pub fn current(&self) -> &[f64] {
        &self.current
    }

    /// Advances by one step of increments `Z_t − Z_{t−1}`. Returns `true` if `t`
    /// became the new anchor.
    pub fn push_increments(&mut self, increments: &[f64]) -> bool {
        debug_assert_eq!(increments.len(), self.dim);
        self.t += 1;
        for (z, l) in self.current.iter_mut().zip(increments) {
            *z += l;
        }
        let regenerates = match self.rule {
            WindowRule::Regeneration => self.current.iter().zip(&self.running_min).all(|(z, m)| z <= m),
            WindowRule::Sigma => self.current.iter().all(|&z| z < 0.0),
        };
        if regenerates {
            self.anchor = self.t;
            self.current.fill(0.0);
            self.running_min.fill(0.0);
            self.entries.clear();
            self.entries.resize(self.dim, 0.0);
        } else {
            for (m, &z) in self.running_min.iter_mut().zip(&self.current) {
                if z < *m {
                    *m = z;
                }
            }
            self.entries.extend_from_slice(&self.current);
        }
        regenerates
    }

    /// Advances to cumulative sums `Z_t` given in absolute terms, with `z_prev = Z_{t−1}`.
    pub fn push_cumulative(&mut self, z_prev: &[f64], z_t: &[f64]) -> bool {
        let inc: Vec<f64> = z_t.iter().zip(z_prev).map(|(a, b)| a - b).collect();
        self.push_increments(&inc)
    }

    /// Differences `Z_t − Z_s` for each `s` in the window, oldest first.
    pub fn differences(&self) -> impl Iterator<Item = impl Iterator<Item = f64> + '_> + '_ {
        self.entries.chunks_exact(self.dim.max(1)).map(move |zs| self.current.iter().zip(zs).map(|(zt, z)| zt - z))
    }

    /// `max_{anchor ≤ s ≤ t} G(Z_t − Z_s)`, with `scratch` reused for the argument.
    pub fn windowed_max<G>(&self, scratch: &mut [f64], mut g: G) -> f64
    where
        G: FnMut(&[f64]) -> f64,
    {
        let mut best = f64::NEG_INFINITY;
        for zs in self.entries.chunks_exact(self.dim.max(1)) {
            for ((d, zt), z) in scratch.iter_mut().zip(&self.current).zip(zs) {
                *d = zt - z;
            }
            let v = g(&scratch[..self.dim]);
            if v > best {
                best = v;
            }
        }
        best
    }
}

/// Free-function form of [`RegenerationTracker::windowed_max`].
pub fn windowed_max<G>(tracker: &RegenerationTracker, g: G) -> f64
where
    G: FnMut(&[f64]) -> f64,
{
    let mut scratch = vec![0.0; tracker.dim()];
    tracker.windowed_max(&mut scratch, g)
}

/// Reference without any window: `max_{0 ≤ s ≤ t} G(Z_t − Z_s)` for every `t`
/// of the increment path, in `O(t²)` per path. Meant for verification.
pub fn full_history_max<G>(increments: &[Vec<f64>], mut g: G) -> Vec<f64>
where
    G: FnMut(&[f64]) -> f64,
{
    let dim = increments.first().map_or(0, Vec::len);
    let mut z = vec![vec![0.0; dim]];
    let mut d = vec![0.0; dim];
    let mut out = Vec::with_capacity(increments.len());
    for inc in increments {
        let next: Vec<f64> = z.last().unwrap().iter().zip(inc).map(|(a, b)| a + b).collect();
        z.push(next);
        let zt = z.last().unwrap();
        let mut best = f64::NEG_INFINITY;
        for zs in &z {
            for ((d, a), b) in d.iter_mut().zip(zt).zip(zs) {
                *d = a - b;
            }
            best = best.max(g(&d));
        }
        out.push(best);
    }
    out
}
