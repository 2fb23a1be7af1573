//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use dmca_core::agent::Transition;
use dmca_core::channel::{
    generate_synthetic, EnvConfig, Environment, SyntheticKind, SyntheticSpec, TraceMeta,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn synthetic_spec(speed_kmh: f64) -> SyntheticSpec {
    SyntheticSpec {
        kind: SyntheticKind::SumOfSinusoids {
            paths: 8,
            noise: 0.0,
            gain_spread_db: 6.0,
        },
        scale: 1e-6,
        meta: TraceMeta {
            fs_hz: 1000.0,
            fc_hz: 2.0e9,
            speed_kmh,
        },
    }
}

/// Environment over a synthetic trace with `channels` channels and `users` real users.
pub fn environment(channels: usize, users: usize, slots: usize) -> Environment {
    let trace =
        Arc::new(generate_synthetic(&synthetic_spec(3.0), slots, channels, 1).expect("valid spec"));
    let cfg = EnvConfig {
        channels,
        user_slots: users,
        real_users: users,
        ..EnvConfig::default()
    };
    Environment::new(&cfg, trace, 1).expect("valid environment")
}

pub fn instance(channels: usize, users: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = (0..channels).map(|_| rng.random_range(0.0..10.0)).collect();
    let reqs = (0..users).map(|_| rng.random_range(0.0..10.0)).collect();
    (rates, reqs)
}

pub fn transitions(n: usize, state_dim: usize, action_dim: usize, seed: u64) -> Vec<Transition> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = |n: usize, lo: f64, hi: f64| -> Vec<f64> {
        (0..n).map(|_| rng.random_range(lo..hi)).collect()
    };
    (0..n)
        .map(|_| Transition {
            state: v(state_dim, 0.0, 2.0),
            action: v(action_dim, 0.05, 0.95),
            reward: v(1, -1.0, 1.0)[0],
            next_state: v(state_dim, 0.0, 2.0),
            predicted_next: v(state_dim, 0.0, 2.0),
            confidence: 0.5,
        })
        .collect()
}
