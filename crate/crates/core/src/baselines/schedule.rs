use std::fmt;

use serde::{Deserialize, Serialize};

use super::Policy;
use crate::channel::Environment;
use crate::error::{Error, Result};
use crate::metrics::{non_instant_decision_error, Trajectory};

/// How often the policy is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cadence {
    OneSlot,
    /// Recompute every `l` slots and hold in between.
    LSlot(usize),
}

impl Cadence {
    pub fn period(&self) -> usize {
        match self {
            Cadence::OneSlot => 1,
            Cadence::LSlot(l) => *l,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Cadence::OneSlot => "one-slot",
            Cadence::LSlot(_) => "l-slot",
        }
    }
}

impl fmt::Display for Cadence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyMode {
    pub cadence: Cadence,
    /// Slots between observation and execution.
    pub lag: usize,
}

#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub trajectory: Trajectory,
    /// Throughput each executed decision would have had at its observation slot.
    pub nominal_throughput: Vec<f64>,
}

impl ScheduleRun {
    /// Mean relative loss from executing late, over slots where it is defined.
    pub fn mean_decision_error(&self) -> Option<f64> {
        let errs: Vec<f64> = self
            .nominal_throughput
            .iter()
            .zip(self.trajectory.throughputs())
            .filter_map(|(&now, late)| non_instant_decision_error(now, late))
            .collect();
        (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
    }
}

/// Runs `policy` over observation slots `start..start + horizon` from a reset environment.
pub fn schedule(
    policy: &mut dyn Policy,
    env: &mut Environment,
    mode: PolicyMode,
    start: usize,
    horizon: usize,
) -> Result<ScheduleRun> {
    let period = mode.cadence.period();
    if period == 0 {
        return Err(Error::Config(
            "decision period must be at least one slot".into(),
        ));
    }
    let needed = start + horizon + mode.lag;
    if needed > env.slots() {
        return Err(Error::TraceTooShort {
            needed,
            available: env.slots(),
        });
    }
    env.reset();
    let mut trajectory = Trajectory::new(env.real_users());
    let mut nominal = Vec::with_capacity(horizon);
    let mut decision = None;
    for t in start..start + horizon {
        if (t - start).is_multiple_of(period) {
            decision = Some(policy.decide(env, t)?);
        }
        let d = decision.as_ref().expect("decided at the first slot");
        nominal.push(env.throughput_of(t, d)?);
        let out = env.step(t, d, mode.lag)?;
        trajectory.push_outcome(&out)?;
    }
    Ok(ScheduleRun {
        trajectory,
        nominal_throughput: nominal,
    })
}
