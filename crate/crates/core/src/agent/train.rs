//! Episode loop, stop rule, evaluation policy and persistence.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentConfig, Ddpg, OuNoise, ReplayBuffer, Transition};
use crate::baselines::Policy;
use crate::channel::{decode_action, Decision, Environment, Forecasts, StreamingMode, SystemState};
use crate::error::{Error, Result};
use crate::io::{read_file, write_file};
use crate::nn::{checkpoint, HasParams};
use crate::reward::{arccot, base_reward, final_reward, RewardParams};
use crate::rng::keyed_rng;

/// Stop threshold derived from the reward shape: the smallest living-mode reward
/// with every user served, or zero in buffered mode.
pub fn default_r_target(mode: StreamingMode, user_slots: usize, p: &RewardParams) -> f64 {
    match mode {
        StreamingMode::Lsm => p.w1 * arccot(p.w2 * user_slots as f64 * FRAC_PI_2),
        StreamingMode::Bsm => 0.0,
    }
}

/// Trained networks plus everything needed to turn observations into decisions.
#[derive(Debug, Clone)]
pub struct Agent {
    pub ddpg: Ddpg,
    pub cfg: AgentConfig,
    pub state_scale: f64,
    pub channels: usize,
    pub user_slots: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AgentMeta {
    state_scale: f64,
    channels: usize,
    user_slots: usize,
    config: AgentConfig,
}

impl Agent {
    pub fn new(env: &Environment, cfg: &AgentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let state_scale = match cfg.state_scale {
            Some(s) => s,
            None => env
                .radio()
                .rate(env.trace().rms_gain())
                .max(f64::MIN_POSITIVE),
        };
        let m = env.channels();
        let k = env.user_slots();
        let state_dim = m + k + cfg.state_horizon() * m;
        let mut rng = keyed_rng(seed, &[0xA6E, 0]);
        Ok(Self {
            ddpg: Ddpg::new(state_dim, k, cfg, &mut rng)?,
            cfg: cfg.clone(),
            state_scale,
            channels: m,
            user_slots: k,
        })
    }

    fn check_env(&self, env: &Environment) -> Result<()> {
        if env.channels() != self.channels || env.user_slots() != self.user_slots {
            return Err(Error::Config(format!(
                "agent built for {} channels and {} user slots, environment has {} and {}",
                self.channels,
                self.user_slots,
                env.channels(),
                env.user_slots()
            )));
        }
        Ok(())
    }

    pub fn observe(
        &self,
        env: &Environment,
        slot: usize,
        forecasts: Option<&Forecasts>,
    ) -> Result<SystemState> {
        let f = if self.cfg.use_prediction {
            forecasts
        } else {
            None
        };
        env.observe(slot, f, self.cfg.state_horizon())
    }

    pub fn features(&self, state: &SystemState) -> Vec<f64> {
        state.features(self.state_scale)
    }

    pub fn decide(
        &self,
        env: &Environment,
        slot: usize,
        forecasts: Option<&Forecasts>,
    ) -> Result<Decision> {
        self.check_env(env)?;
        let s = self.features(&self.observe(env, slot, forecasts)?);
        decode_action(&self.ddpg.act(&s)?, self.channels)
    }

    pub fn save(&self, dir: &Path, comments: &[String]) -> Result<()> {
        checkpoint::save(
            &dir.join("actor.params"),
            self.ddpg.actor.params(),
            comments,
        )?;
        checkpoint::save(
            &dir.join("critic.params"),
            self.ddpg.critic.params(),
            comments,
        )?;
        let meta = AgentMeta {
            state_scale: self.state_scale,
            channels: self.channels,
            user_slots: self.user_slots,
            config: self.cfg.clone(),
        };
        let mut text = String::new();
        for c in comments {
            let _ = writeln!(text, "# {c}");
        }
        text.push_str(&toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))?);
        write_file(&dir.join("agent.toml"), &text)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("agent.toml");
        if !meta_path.exists() {
            return Err(Error::MissingCheckpoint(meta_path));
        }
        let meta: AgentMeta = toml::from_str(&read_file(&meta_path)?)
            .map_err(|e| Error::parse(&meta_path, e.to_string()))?;
        meta.config.validate()?;
        let state_dim =
            meta.channels + meta.user_slots + meta.config.state_horizon() * meta.channels;
        let mut rng = keyed_rng(0, &[0xA6E, 0]);
        let mut ddpg = Ddpg::new(state_dim, meta.user_slots, &meta.config, &mut rng)?;
        checkpoint::load_into(&dir.join("actor.params"), ddpg.actor.params_mut())?;
        checkpoint::load_into(&dir.join("critic.params"), ddpg.critic.params_mut())?;
        let (actor, critic) = (ddpg.actor.clone(), ddpg.critic.clone());
        Ok(Self {
            ddpg: ddpg.with_networks(actor, critic)?,
            cfg: meta.config,
            state_scale: meta.state_scale,
            channels: meta.channels,
            user_slots: meta.user_slots,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Steps until the stop rule fired (or the step limit).
    pub steps: usize,
    pub mean_reward: f64,
    pub final_reward: f64,
    pub rho_mean: f64,
    /// The episode ran out of trace before either stop condition.
    pub truncated: bool,
    pub stopped: bool,
}

pub fn episode_log_csv(log: &[EpisodeLog], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("episode,steps,mean_reward,final_reward,rho_mean\n");
    for e in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.episode, e.steps, e.mean_reward, e.final_reward, e.rho_mean
        );
    }
    out
}

/// Where and how an agent trains.
#[derive(Debug, Clone)]
pub struct TrainSetup<'a> {
    pub forecasts: Option<&'a Forecasts>,
    pub reward: RewardParams,
    pub lag: usize,
    /// Observation slots available to episodes.
    pub slots: Range<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Training {
    pub agent: Agent,
    pub log: Vec<EpisodeLog>,
    pub r_target: f64,
    pub poisoned_updates: usize,
}

pub fn train(env: &mut Environment, cfg: &AgentConfig, setup: &TrainSetup<'_>) -> Result<Training> {
    let mut agent = Agent::new(env, cfg, setup.seed)?;
    let log = train_agent(&mut agent, env, setup)?;
    Ok(log)
}

/// Continues training an existing agent.
pub fn train_agent(
    agent: &mut Agent,
    env: &mut Environment,
    setup: &TrainSetup<'_>,
) -> Result<Training> {
    agent.check_env(env)?;
    setup.reward.validate()?;
    let cfg = agent.cfg.clone();
    // observing the successor needs one slot past execution
    let last_start = setup
        .slots
        .end
        .min(env.slots())
        .saturating_sub(setup.lag + 1);
    if last_start <= setup.slots.start {
        return Err(Error::TraceTooShort {
            needed: setup.slots.start + setup.lag + 2,
            available: setup.slots.end.min(env.slots()),
        });
    }
    if let Some(f) = setup.forecasts {
        if f.slots() < env.slots() {
            return Err(Error::TraceTooShort {
                needed: env.slots(),
                available: f.slots(),
            });
        }
    }
    let r_target = cfg
        .r_target
        .unwrap_or_else(|| default_r_target(env.mode(), env.user_slots(), &setup.reward));
    let mut start_rng = keyed_rng(setup.seed, &[0xA6E, 1]);
    let mut noise_rng = keyed_rng(setup.seed, &[0xA6E, 2]);
    let mut sample_rng = keyed_rng(setup.seed, &[0xA6E, 3]);
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut noise = OuNoise::new(agent.user_slots, cfg.ou_theta, cfg.ou_sigma, cfg.ou_mu);
    let min_steps = cfg.horizon.max(cfg.stop_streak);
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut poisoned = 0;

    for episode in 0..cfg.episodes {
        env.reset();
        noise.reset();
        noise.sigma = cfg.sigma_at(episode);
        let span = last_start - setup.slots.start;
        let latest = span.saturating_sub(cfg.max_steps).max(1);
        let start = setup.slots.start + start_rng.random_range(0..latest);
        let (mut steps, mut streak, mut total, mut rho_total, mut last_r) = (0, 0, 0.0, 0.0, 0.0);
        let mut stopped = false;
        let mut truncated = false;
        let mut state = agent.observe(env, start, setup.forecasts)?;
        while steps < cfg.max_steps {
            let t = start + steps;
            if t >= last_start {
                truncated = true;
                break;
            }
            let s = agent.features(&state);
            let action = agent.ddpg.act_noisy(&s, noise.sample(&mut noise_rng))?;
            let decision = decode_action(&action, agent.channels)?;
            let out = env.step(t, &decision, setup.lag)?;
            let deltas: Vec<f64> = out
                .deltas
                .iter()
                .map(|d| d / cfg.reward_rate_unit)
                .collect();
            let r = final_reward(
                out.collision,
                base_reward(env.mode(), &deltas, out.theta, &setup.reward),
                &setup.reward,
            );
            let next = agent.observe(env, t + 1, setup.forecasts)?;
            let next_f = agent.features(&next);
            let (predicted_next, confidence) = match (state.predicted_next(), setup.forecasts) {
                (Some(p), Some(f)) if cfg.use_prediction => {
                    (agent.features(&p), f.confidence_at(t))
                }
                _ => (next_f.clone(), 0.0),
            };
            buffer.push(Transition {
                state: s,
                action,
                reward: r,
                next_state: next_f,
                predicted_next,
                confidence,
            });
            if buffer.len() >= cfg.minibatch.max(1) {
                let batch = buffer.sample(cfg.sample_size, &mut sample_rng);
                match agent.ddpg.train_step(&batch) {
                    Ok(_) => {}
                    Err(Error::PoisonedUpdate(what)) => {
                        poisoned += 1;
                        log::warn!(
                            "episode {episode} step {steps}: skipped update with non-finite {what}"
                        );
                    }
                    Err(e) => return Err(e),
                }
            }
            steps += 1;
            total += r;
            rho_total += confidence;
            last_r = r;
            streak = if r > r_target { streak + 1 } else { 0 };
            state = next;
            if streak >= cfg.stop_streak && steps >= min_steps {
                stopped = true;
                break;
            }
        }
        let n = steps.max(1) as f64;
        let entry = EpisodeLog {
            episode,
            steps,
            mean_reward: total / n,
            final_reward: last_r,
            rho_mean: rho_total / n,
            truncated,
            stopped,
        };
        log::debug!(
            "episode {episode}: {} steps, mean reward {:.4}",
            entry.steps,
            entry.mean_reward
        );
        log.push(entry);
    }
    Ok(Training {
        agent: agent.clone(),
        log,
        r_target,
        poisoned_updates: poisoned,
    })
}

/// A trained agent as a scheduling policy.
pub struct AgentPolicy<'a> {
    pub agent: &'a Agent,
    pub forecasts: Option<&'a Forecasts>,
}

impl Policy for AgentPolicy<'_> {
    fn name(&self) -> &str {
        "learning"
    }

    fn decide(&mut self, env: &Environment, slot: usize) -> Result<Decision> {
        self.agent.decide(env, slot, self.forecasts)
    }
}

/// First episode after which `window` consecutive episodes stop within `limit` steps.
pub fn convergence_episode(log: &[EpisodeLog], limit: usize, window: usize) -> Option<usize> {
    let ok: Vec<bool> = log.iter().map(|e| e.stopped && e.steps <= limit).collect();
    (0..ok.len().saturating_sub(window - 1)).find(|&i| ok[i..i + window].iter().all(|&b| b))
}
