use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub gamma: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub replay_capacity: usize,
    /// Transitions sampled per update step.
    pub sample_size: usize,
    /// Buffer fill required before updates begin.
    pub minibatch: usize,
    pub episodes: usize,
    pub max_steps: usize,
    /// Forecast slots in the state and the decision period of the l-slot cadence.
    pub horizon: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_mu: f64,
    /// Per-episode multiplier on the noise scale.
    pub noise_decay: f64,
    pub noise_floor: f64,
    /// Adds the discount to the predicted-state term of the target.
    pub discount_predicted: bool,
    /// Without prediction the state omits forecasts and the confidence is zero.
    pub use_prediction: bool,
    /// Consecutive above-target rewards that end an episode.
    pub stop_streak: usize,
    /// Reward threshold of the stop rule; derived from the reward shape when absent.
    pub r_target: Option<f64>,
    /// Rates are divided by this before entering the reward.
    pub reward_rate_unit: f64,
    /// Rates are divided by this before entering the networks; the rate at the
    /// trace RMS gain when absent.
    pub state_scale: Option<f64>,
    pub grad_clip: f64,
    /// Weight of a quadratic penalty on the actor's pre-sigmoid outputs.
    pub logit_penalty: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.92,
            tau: 0.01,
            replay_capacity: 2000,
            sample_size: 32,
            minibatch: 64,
            episodes: 300,
            max_steps: 3000,
            horizon: 5,
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            hidden: vec![128, 128],
            ou_theta: 0.15,
            ou_sigma: 0.2,
            ou_mu: 0.0,
            noise_decay: 1.0,
            noise_floor: 0.0,
            discount_predicted: false,
            use_prediction: true,
            stop_streak: 5,
            r_target: None,
            reward_rate_unit: 1.0,
            state_scale: None,
            grad_clip: 10.0,
            logit_penalty: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("agent: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail("gamma must lie in (0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return fail("tau must lie in (0, 1]");
        }
        if self.sample_size == 0
            || self.replay_capacity < self.sample_size
            || self.replay_capacity < self.minibatch
        {
            return fail("replay capacity must cover the sample and warm-up sizes");
        }
        if self.episodes == 0 || self.max_steps == 0 || self.horizon == 0 || self.stop_streak == 0 {
            return fail("episodes, steps, horizon and stop streak must be positive");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive");
        }
        let pos = [
            self.actor_lr,
            self.critic_lr,
            self.reward_rate_unit,
            self.grad_clip,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return fail("learning rates, reward unit and clip must be positive");
        }
        if self
            .state_scale
            .is_some_and(|s| !(s > 0.0 && s.is_finite()))
        {
            return fail("state scale must be positive");
        }
        if self.ou_theta < 0.0
            || self.ou_sigma < 0.0
            || !(0.0..=1.0).contains(&self.noise_decay)
            || self.noise_floor < 0.0
        {
            return fail("noise parameters must be nonnegative with decay in [0, 1]");
        }
        if !(self.logit_penalty >= 0.0 && self.logit_penalty.is_finite()) {
            return fail("logit penalty must be nonnegative");
        }
        Ok(())
    }

    /// Forecast slots that enter the state.
    pub fn state_horizon(&self) -> usize {
        if self.use_prediction {
            self.horizon
        } else {
            0
        }
    }

    /// Noise scale during episode `e`.
    pub fn sigma_at(&self, episode: usize) -> f64 {
        (self.ou_sigma * self.noise_decay.powi(episode as i32))
            .max(self.noise_floor.min(self.ou_sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = AgentConfig::default();
        c.validate().unwrap();
        assert_eq!(c.gamma, 0.92);
        assert_eq!(c.replay_capacity, 2000);
        assert_eq!((c.sample_size, c.minibatch), (32, 64));
        assert_eq!((c.episodes, c.max_steps, c.horizon), (300, 3000, 5));
    }

    #[test]
    fn rejects_bad_values() {
        for f in [
            |c: &mut AgentConfig| c.gamma = 0.0,
            |c: &mut AgentConfig| c.tau = 1.5,
            |c: &mut AgentConfig| c.replay_capacity = 10,
            |c: &mut AgentConfig| c.hidden = vec![],
            |c: &mut AgentConfig| c.state_scale = Some(-1.0),
        ] {
            let mut c = AgentConfig::default();
            f(&mut c);
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn noise_schedule() {
        let c = AgentConfig {
            noise_decay: 0.5,
            noise_floor: 0.05,
            ..AgentConfig::default()
        };
        assert_eq!(c.sigma_at(0), 0.2);
        assert_eq!(c.sigma_at(1), 0.1);
        assert_eq!(c.sigma_at(10), 0.05);
        assert_eq!(AgentConfig::default().sigma_at(50), 0.2);
    }
}
