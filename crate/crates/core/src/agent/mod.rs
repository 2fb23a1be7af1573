//! Prediction-augmented deep deterministic policy gradient agent.

mod config;
mod ddpg;
mod noise;
mod replay;
mod train;

pub use config::AgentConfig;
pub use ddpg::{pddpg_target, soft_update, squash, Ddpg, ACTION_MARGIN};
pub use noise::OuNoise;
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    convergence_episode, default_r_target, episode_log_csv, train, train_agent, Agent, AgentPolicy,
    EpisodeLog, TrainSetup, Training,
};
