//! Shaped rewards for the two streaming modes and the collision penalty.

use serde::{Deserialize, Serialize};

use crate::channel::StreamingMode;
use crate::error::{Error, Result};

/// Cap on the outer exponent of the buffered failure branch.
pub const BSM_EXPONENT_CAP: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub w1: f64,
    pub w2: f64,
    /// Collision penalty (negative).
    pub w3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            w1: 5.0,
            w2: 5.0,
            w3: -100.0,
            alpha1: 0.5,
            alpha2: 0.5,
            eps: 1e-7,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.w1, self.w2, self.alpha1, self.alpha2, self.eps];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(self.w3 < 0.0) {
            return Err(Error::Config(
                "reward weights, factors and guard must be positive and the penalty negative"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Inverse cotangent with range `(0, π)`.
pub fn arccot(x: f64) -> f64 {
    std::f64::consts::FRAC_PI_2 - x.atan()
}

fn upsilon(delta: f64, theta: f64, eps: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        theta + eps
    }
}

pub fn lsm_reward(deltas: &[f64], theta: f64, p: &RewardParams) -> f64 {
    if theta >= 1.0 {
        let s: f64 = deltas.iter().map(|d| d.atan()).sum();
        p.w1 * arccot(p.w2 * s)
    } else {
        let s: f64 = deltas
            .iter()
            .map(|&d| (d.abs() / upsilon(d, theta, p.eps)).atan())
            .sum();
        theta * p.w1 * arccot(p.w2 * s)
    }
}

pub fn bsm_reward(deltas: &[f64], theta: f64, p: &RewardParams) -> f64 {
    if theta >= 1.0 {
        let s: f64 = deltas.iter().map(|d| d.atan()).sum();
        p.w1 * ((p.alpha1 * p.w2 * s).exp() - 1.0)
    } else {
        let s: f64 = deltas.iter().map(|&d| d / upsilon(d, theta, p.eps)).sum();
        // α1·ϖ2·exp(α2·s) ≤ cap  ⇔  s ≤ ln(cap / (α1·ϖ2)) / α2
        let s_max = (BSM_EXPONENT_CAP / (p.alpha1 * p.w2)).ln() / p.alpha2;
        let inner = (p.alpha2 * s.min(s_max)).exp();
        theta * p.w1 * ((p.alpha1 * p.w2 * inner).exp() - 1.0)
    }
}

pub fn base_reward(mode: StreamingMode, deltas: &[f64], theta: f64, p: &RewardParams) -> f64 {
    match mode {
        StreamingMode::Lsm => lsm_reward(deltas, theta, p),
        StreamingMode::Bsm => bsm_reward(deltas, theta, p),
    }
}

/// The base reward, or the penalty when any two user slots share a channel.
pub fn final_reward(collision: bool, base: f64, p: &RewardParams) -> f64 {
    if collision {
        p.w3
    } else {
        base
    }
}
