//! Channel traces, users and the access environment.

mod decision;
mod env;
mod radio;
mod state;
mod trace;
mod users;

pub use decision::{decode_action, encode_channel, Decision};
pub use env::{EnvConfig, Environment, StepOutcome, REFERENCE_LAMBDAS};
pub use radio::{
    channel_rate, dbm_to_mw, delay_sensitivity, ppqos_factor, ppqos_rate, ChannelConfig,
};
pub use state::{Forecasts, SystemState};
pub use trace::{
    doppler_per_slot, generate_synthetic, path_amplitudes, ChannelTrace, SyntheticKind,
    SyntheticSpec, TraceMeta,
};
pub use users::{RequirementGenerator, StreamingMode, UserProfile, UserSet};
