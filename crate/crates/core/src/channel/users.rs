//! Users, requirement generation and streaming caches.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::radio::{ppqos_factor, ChannelConfig};
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamingMode {
    /// Living streaming: meet the requirement with as little surplus as possible.
    Lsm,
    /// Buffered streaming: maximise surplus; caches fill and full users disconnect.
    Bsm,
}

impl std::fmt::Display for StreamingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StreamingMode::Lsm => "lsm",
            StreamingMode::Bsm => "bsm",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub lambda: f64,
    pub beta: f64,
    pub virtual_user: bool,
    pub mode: StreamingMode,
    pub cache_capacity_bits: f64,
    pub cache_fill_bits: f64,
    /// Incremented each time the slot is handed to a replacement user.
    pub generation: u64,
}

impl UserProfile {
    pub fn virtual_slot(mode: StreamingMode) -> Self {
        Self {
            lambda: 0.5,
            beta: 1.0,
            virtual_user: true,
            mode,
            cache_capacity_bits: f64::INFINITY,
            cache_fill_bits: 0.0,
            generation: 0,
        }
    }

    pub fn ppqos_factor(&self) -> f64 {
        ppqos_factor(self.lambda, self.beta)
    }
}

/// Piecewise-constant requirement factors `ξ_n(t)`, drawn per hold block.
///
/// Each block draw is keyed by `(seed, user, generation, block)` so any slot can be
/// queried in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct RequirementGenerator {
    pub seed: u64,
    pub hold: usize,
    pub xi_low: f64,
    pub xi_high: f64,
    /// Weight `ρ` in `ρ·B·log2(1 + ξ²P/σ²)`.
    pub weight: f64,
    radio: ChannelConfig,
}

impl RequirementGenerator {
    pub fn new(
        radio: ChannelConfig,
        weight: f64,
        hold: usize,
        xi_low: f64,
        xi_high: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::Config(format!(
                "requirement weight {weight} outside (0, 1]"
            )));
        }
        if hold == 0 {
            return Err(Error::Config(
                "requirement hold must be at least one slot".into(),
            ));
        }
        if !(0.0 <= xi_low && xi_low <= xi_high && xi_high.is_finite()) {
            return Err(Error::Config(format!(
                "bad requirement factor range [{xi_low}, {xi_high}]"
            )));
        }
        Ok(Self {
            seed,
            hold,
            xi_low,
            xi_high,
            weight,
            radio,
        })
    }

    pub fn factor(&self, user: usize, generation: u64, slot: usize) -> f64 {
        if self.xi_high == self.xi_low {
            return self.xi_low;
        }
        let block = (slot / self.hold) as u64;
        keyed_rng(self.seed, &[0xE5, user as u64, generation, block])
            .random_range(self.xi_low..self.xi_high)
    }

    /// Base requirement `R_user(t)` in bits/s.
    pub fn base(&self, user: usize, generation: u64, slot: usize) -> f64 {
        self.weight * self.radio.rate(self.factor(user, generation, slot))
    }

    /// Base requirement at the midpoint factor, used to size caches.
    pub fn typical_base(&self) -> f64 {
        self.weight * self.radio.rate(0.5 * (self.xi_low + self.xi_high))
    }
}

/// The `K` user slots: real users first, then virtual users.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSet {
    pub users: Vec<UserProfile>,
    pub real: usize,
}

impl UserSet {
    pub fn new(
        slots: usize,
        real: usize,
        mode: StreamingMode,
        lambdas: &[f64],
        beta: f64,
        cache_capacity_bits: f64,
    ) -> Result<Self> {
        if real == 0 || real > slots {
            return Err(Error::Config(format!(
                "need 1 ≤ N ≤ K, got N={real}, K={slots}"
            )));
        }
        if lambdas.is_empty() || lambdas.iter().any(|&l| !(l > 0.0 && l <= 1.0)) {
            return Err(Error::Config(
                "delay sensitivities must be a nonempty list in (0, 1]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Config(format!("β = {beta} outside [0, 1]")));
        }
        let users = (0..slots)
            .map(|n| {
                if n < real {
                    UserProfile {
                        lambda: lambdas[n % lambdas.len()],
                        beta,
                        virtual_user: false,
                        mode,
                        cache_capacity_bits,
                        cache_fill_bits: 0.0,
                        generation: 0,
                    }
                } else {
                    UserProfile::virtual_slot(mode)
                }
            })
            .collect();
        Ok(Self { users, real })
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }
}
