//! Reference access policies and the scheduling loop shared with the learning agent.

mod assignment;
mod schedule;

pub use assignment::{exhaustive_assignment, hungarian_assignment, Objective, ENUMERATION_LIMIT};
pub use schedule::{schedule, Cadence, PolicyMode, ScheduleRun};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{Decision, Environment};
use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Produces a decision from what is observable at a slot.
pub trait Policy {
    fn name(&self) -> &str;
    fn decide(&mut self, env: &Environment, slot: usize) -> Result<Decision>;
}

/// `k` distinct channels drawn uniformly.
pub fn random_policy<R: Rng + ?Sized>(channels: usize, k: usize, rng: &mut R) -> Result<Decision> {
    if k > channels {
        return Err(Error::Infeasible(format!(
            "{k} users cannot share {channels} channels"
        )));
    }
    Decision::new(sample(rng, channels, k).into_vec(), channels)
}

/// Optimal real-user assignment; virtual slots take the lowest unused channels.
pub fn exhaustive_policy(env: &Environment, slot: usize) -> Result<Decision> {
    let rates = env.rates_at(slot)?;
    let reqs = env.requirements_at(slot)?;
    let n = env.real_users();
    let mut chans = exhaustive_assignment(rates, &reqs[..n], env.mode())?;
    let free: Vec<usize> = (0..env.channels()).filter(|c| !chans.contains(c)).collect();
    let mut free = free.into_iter();
    while chans.len() < env.user_slots() {
        chans.push(free.next().ok_or_else(|| {
            Error::Infeasible(format!(
                "{} user slots exceed {} channels",
                env.user_slots(),
                env.channels()
            ))
        })?);
    }
    Decision::new(chans, env.channels())
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: keyed_rng(seed, &[0x4A4D]),
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, env: &Environment, _slot: usize) -> Result<Decision> {
        random_policy(env.channels(), env.user_slots(), &mut self.rng)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ExhaustivePolicy;

impl Policy for ExhaustivePolicy {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn decide(&mut self, env: &Environment, slot: usize) -> Result<Decision> {
        exhaustive_policy(env, slot)
    }
}
