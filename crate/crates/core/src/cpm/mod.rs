//! Online channel prediction with a small LSTM per channel.

mod confidence;
mod net;
mod online;
mod predictor;

pub use confidence::{
    confidence_from_nmse, nmse, pooled_confidence, ConfidenceTracker, PredictionRecord,
};
pub use net::{CpmNet, CpmRecord};
pub use online::{
    forecast_trace, loss_curve_csv, persistence_nmse, prediction_log_csv, run_online,
    write_prediction_log, OnlineRun, TraceForecast,
};
pub use predictor::{ChannelPredictor, CpmConfig, IlEvent, LossCurve, Normalizer};
