//! Online and target actor-critic networks with their updates.

use rand::Rng;

use super::{AgentConfig, Transition};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, HasParams, Mlp, Optimizer, ParamSet};

/// Actions are kept this far inside `(0, 1)`.
pub const ACTION_MARGIN: f64 = 1e-6;

pub fn squash(x: f64) -> f64 {
    x.clamp(ACTION_MARGIN, 1.0 - ACTION_MARGIN)
}

/// `r + (1−ϱ)·γ·Q_next + ϱ·Q_pre`; with `discount_predicted` the last term also carries γ.
/// The predicted term is skipped entirely at `ϱ = 0`.
pub fn pddpg_target(
    reward: f64,
    gamma: f64,
    confidence: f64,
    q_next: f64,
    q_pre: f64,
    discount_predicted: bool,
) -> f64 {
    let y = reward + (1.0 - confidence) * gamma * q_next;
    if confidence == 0.0 {
        return y;
    }
    let pre = if discount_predicted {
        gamma * q_pre
    } else {
        q_pre
    };
    y + confidence * pre
}

/// `θ′ ← τ·θ + (1 − τ)·θ′`
pub fn soft_update(target: &mut ParamSet, online: &ParamSet, tau: f64) -> Result<()> {
    check_len("soft update parameter count", online.len(), target.len())?;
    for (t, o) in target.iter_mut().zip(online.iter()) {
        check_len("soft update parameter shape", o.len(), t.len())?;
        for (tv, &ov) in t.value.iter_mut().zip(&o.value) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}

fn joined(state: &[f64], action: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(state.len() + action.len());
    x.extend_from_slice(state);
    x.extend_from_slice(action);
    x
}

#[derive(Debug, Clone)]
pub struct Ddpg {
    pub actor: Mlp,
    pub critic: Mlp,
    pub actor_target: Mlp,
    pub critic_target: Mlp,
    actor_opt: Optimizer,
    critic_opt: Optimizer,
    state_dim: usize,
    action_dim: usize,
    gamma: f64,
    tau: f64,
    discount_predicted: bool,
    logit_penalty: f64,
}

impl Ddpg {
    /// Rectifier hidden layers; sigmoid actor output, linear critic output.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        cfg: &AgentConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut a_sizes = vec![state_dim];
        a_sizes.extend(&cfg.hidden);
        a_sizes.push(action_dim);
        let mut c_sizes = vec![state_dim + action_dim];
        c_sizes.extend(&cfg.hidden);
        c_sizes.push(1);
        let actor = Mlp::new(
            "actor",
            &a_sizes,
            Activation::Relu,
            Activation::Sigmoid,
            rng,
        )?;
        let critic = Mlp::new(
            "critic",
            &c_sizes,
            Activation::Relu,
            Activation::Linear,
            rng,
        )?;
        Ok(Self {
            actor_target: actor.clone(),
            critic_target: critic.clone(),
            actor,
            critic,
            actor_opt: Optimizer::adam(cfg.actor_lr).with_clip_norm(cfg.grad_clip),
            critic_opt: Optimizer::adam(cfg.critic_lr).with_clip_norm(cfg.grad_clip),
            state_dim,
            action_dim,
            gamma: cfg.gamma,
            tau: cfg.tau,
            discount_predicted: cfg.discount_predicted,
            logit_penalty: cfg.logit_penalty,
        })
    }

    /// Replaces the networks, copying them into the targets.
    pub fn with_networks(mut self, actor: Mlp, critic: Mlp) -> Result<Self> {
        check_len("actor input", self.state_dim, actor.input_dim())?;
        check_len("actor output", self.action_dim, actor.output_dim())?;
        check_len(
            "critic input",
            self.state_dim + self.action_dim,
            critic.input_dim(),
        )?;
        check_len("critic output", 1, critic.output_dim())?;
        self.actor_target = actor.clone();
        self.critic_target = critic.clone();
        self.actor = actor;
        self.critic = critic;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    /// Deterministic policy output, kept inside `(0, 1)`.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        Ok(self.actor.forward(state)?.into_iter().map(squash).collect())
    }

    /// Policy output plus noise, kept inside `(0, 1)`.
    pub fn act_noisy(&self, state: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
        check_len("action noise", self.action_dim, noise.len())?;
        Ok(self
            .actor
            .forward(state)?
            .into_iter()
            .zip(noise)
            .map(|(a, n)| squash(a + n))
            .collect())
    }

    pub fn q(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.critic.forward(&joined(state, action))?[0])
    }

    fn target_q(&self, state: &[f64]) -> Result<f64> {
        let a = self.actor_target.forward(state)?;
        Ok(self.critic_target.forward(&joined(state, &a))?[0])
    }

    pub fn targets(&self, batch: &[&Transition]) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|t| {
                let q_next = self.target_q(&t.next_state)?;
                let q_pre = if t.confidence == 0.0 {
                    0.0
                } else {
                    self.target_q(&t.predicted_next)?
                };
                Ok(pddpg_target(
                    t.reward,
                    self.gamma,
                    t.confidence,
                    q_next,
                    q_pre,
                    self.discount_predicted,
                ))
            })
            .collect()
    }

    /// Accumulates the gradient of `mean (Q(s, a) − y)²` into the critic and returns the loss.
    pub fn critic_loss_gradient(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        check_len("critic targets", batch.len(), targets.len())?;
        if batch.is_empty() {
            return Err(Error::InsufficientData("empty critic batch".into()));
        }
        let n = batch.len() as f64;
        let mut loss = 0.0;
        for (t, &y) in batch.iter().zip(targets) {
            let mut tape = self.critic.forward_recorded(&joined(&t.state, &t.action))?;
            let err = tape.record().map_or(0.0, |r| r.output()[0]) - y;
            loss += err * err / n;
            self.critic.backward(&mut tape, &[2.0 * err / n])?;
        }
        Ok(loss)
    }

    /// One optimizer step on the critic; non-finite losses skip the step.
    pub fn update_critic(&mut self, batch: &[&Transition], targets: &[f64]) -> Result<f64> {
        self.critic.params_mut().zero_grad();
        let loss = self.critic_loss_gradient(batch, targets)?;
        if !loss.is_finite() {
            self.critic.params_mut().zero_grad();
            return Err(Error::PoisonedUpdate("critic loss"));
        }
        self.critic_opt.step(self.critic.params_mut())?;
        Ok(loss)
    }

    /// Accumulates the gradient of `−mean dq(s, μ(s))` into the actor, where `dq`
    /// supplies `∂Q/∂a` and `Q`. Returns the mean `Q`.
    pub fn actor_gradient_with<F>(&mut self, states: &[&[f64]], mut dq: F) -> Result<f64>
    where
        F: FnMut(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        if states.is_empty() {
            return Err(Error::InsufficientData("empty actor batch".into()));
        }
        let n = states.len() as f64;
        let mut mean_q = 0.0;
        for s in states {
            let mut tape = self.actor.forward_recorded(s)?;
            let a = tape
                .record()
                .map(|r| r.output().to_vec())
                .unwrap_or_default();
            let (q, grad) = dq(s, &a)?;
            check_len("action gradient", self.action_dim, grad.len())?;
            mean_q += q / n;
            let d: Vec<f64> = grad
                .iter()
                .zip(&a)
                .map(|(g, &a)| {
                    let mut d = -g / n;
                    if self.logit_penalty > 0.0 {
                        // ∂(c/2·z²)/∂a with z = logit(a)
                        let a = a.clamp(1e-12, 1.0 - 1e-12);
                        d += self.logit_penalty * (a / (1.0 - a)).ln() / (a * (1.0 - a)) / n;
                    }
                    d
                })
                .collect();
            self.actor.backward(&mut tape, &d)?;
        }
        Ok(mean_q)
    }

    /// Critic-driven actor gradient; the critic's own gradients are untouched.
    pub fn actor_gradient(&mut self, states: &[&[f64]]) -> Result<f64> {
        let mut critic = self.critic.clone();
        let sd = self.state_dim;
        self.actor_gradient_with(states, |s, a| {
            let mut tape = critic.forward_recorded(&joined(s, a))?;
            let q = tape.record().map_or(0.0, |r| r.output()[0]);
            let g = critic.input_gradient(&mut tape, &[1.0])?;
            Ok((q, g[sd..].to_vec()))
        })
    }

    fn step_actor(&mut self) -> Result<f64> {
        let norm = self.actor.params().grad_norm();
        if !norm.is_finite() {
            self.actor.params_mut().zero_grad();
            return Err(Error::PoisonedUpdate("actor gradient"));
        }
        self.actor_opt.step(self.actor.params_mut())?;
        Ok(norm)
    }

    /// Ascent step on mean `Q(s, μ(s))`; returns the gradient norm.
    pub fn update_actor(&mut self, batch: &[&Transition]) -> Result<f64> {
        self.actor.params_mut().zero_grad();
        let states: Vec<&[f64]> = batch.iter().map(|t| &t.state[..]).collect();
        self.actor_gradient(&states)?;
        self.step_actor()
    }

    /// Actor step against an arbitrary action-value gradient.
    pub fn update_actor_with<F>(&mut self, states: &[&[f64]], dq: F) -> Result<f64>
    where
        F: FnMut(&[f64], &[f64]) -> Result<(f64, Vec<f64>)>,
    {
        self.actor.params_mut().zero_grad();
        self.actor_gradient_with(states, dq)?;
        self.step_actor()
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        soft_update(
            self.actor_target.params_mut(),
            self.actor.params(),
            self.tau,
        )?;
        soft_update(
            self.critic_target.params_mut(),
            self.critic.params(),
            self.tau,
        )
    }

    /// Targets, critic step, actor step, soft update. Returns the critic loss.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64> {
        let y = self.targets(batch)?;
        let loss = self.update_critic(batch, &y)?;
        self.update_actor(batch)?;
        self.soft_update_targets()?;
        Ok(loss)
    }
}
