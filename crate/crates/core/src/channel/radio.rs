//! Radio constants, link rates and the personalised requirement model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Band and power split evenly across `channels`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub channels: usize,
    pub total_bandwidth_hz: f64,
    pub total_power_dbm: f64,
    pub noise_dbm: f64,
}

impl ChannelConfig {
    pub fn new(
        channels: usize,
        channel_bandwidth_hz: f64,
        total_power_dbm: f64,
        noise_dbm: f64,
    ) -> Result<Self> {
        let cfg = Self {
            channels,
            total_bandwidth_hz: channel_bandwidth_hz * channels as f64,
            total_power_dbm,
            noise_dbm,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::Config("channel count must be positive".into()));
        }
        if !(self.total_bandwidth_hz > 0.0 && self.total_bandwidth_hz.is_finite()) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !self.total_power_dbm.is_finite() || !self.noise_dbm.is_finite() {
            return Err(Error::Config(
                "power and noise levels must be finite".into(),
            ));
        }
        Ok(())
    }

    /// `B_m = B / M`
    pub fn channel_bandwidth_hz(&self) -> f64 {
        self.total_bandwidth_hz / self.channels as f64
    }

    pub fn channel_power_mw(&self) -> f64 {
        dbm_to_mw(self.total_power_dbm) / self.channels as f64
    }

    pub fn noise_mw(&self) -> f64 {
        dbm_to_mw(self.noise_dbm)
    }

    /// `P_m / σ²`
    pub fn snr_scale(&self) -> f64 {
        self.channel_power_mw() / self.noise_mw()
    }

    pub fn rate(&self, gain: f64) -> f64 {
        channel_rate(
            gain,
            self.channel_bandwidth_hz(),
            self.channel_power_mw(),
            self.noise_mw(),
        )
    }
}

/// Shannon rate `B·log2(1 + g²P/σ²)` in bits/s.
pub fn channel_rate(gain: f64, bandwidth_hz: f64, power_mw: f64, noise_mw: f64) -> f64 {
    bandwidth_hz * (gain * gain * power_mw / noise_mw).ln_1p() / std::f64::consts::LN_2
}

/// `λ = 1/2 − atan(τ_limit − τ_real)/π`
pub fn delay_sensitivity(tau_limit: f64, tau_real: f64) -> f64 {
    0.5 - (tau_limit - tau_real).atan() / std::f64::consts::PI
}

/// `(2λ + β(1 − 2λ))·base`
pub fn ppqos_rate(lambda: f64, beta: f64, base: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "delay sensitivity {lambda} outside (0, 1]"
        )));
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidInput(format!(
            "subjectivity factor {beta} outside [0, 1]"
        )));
    }
    if !(base >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "negative base requirement {base}"
        )));
    }
    Ok(ppqos_factor(lambda, beta) * base)
}

pub fn ppqos_factor(lambda: f64, beta: f64) -> f64 {
    2.0 * lambda + beta * (1.0 - 2.0 * lambda)
}
