//! Experiment configuration and the commands behind the command-line driver.

mod config;
mod run;

pub use config::{
    ConvergeConfig, ExperimentConfig, ForecastSource, PredictorConfig, RunConfig, TraceConfig,
};
pub use run::{
    cadences, censored_median, compare, converge, eval, gen_trace, pretrain_cpm, smoothed_median,
    train_cmd, ConvergeCell, ConvergeReport, ConvergeRun, EvalReport, Method, Session, TrainReport,
};
