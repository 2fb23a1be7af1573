use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::channel::{EnvConfig, SyntheticKind, SyntheticSpec, TraceMeta};
use crate::cpm::CpmConfig;
use crate::error::{Error, Result};
use crate::io::read_file;
use crate::reward::RewardParams;

/// Where channel gains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub slots: usize,
    /// Trace CSV to load instead of generating one; relative to the config file.
    pub file: Option<PathBuf>,
    pub synthetic: SyntheticSpec,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            slots: 2000,
            file: None,
            synthetic: SyntheticSpec {
                kind: SyntheticKind::SumOfSinusoids {
                    paths: 8,
                    noise: 0.0,
                    gain_spread_db: 6.0,
                },
                scale: 1e-6,
                meta: TraceMeta {
                    fs_hz: 1000.0,
                    fc_hz: 2.0e9,
                    speed_kmh: 3.0,
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    /// Online channel predictors (requires `pretrain-cpm`).
    Cpm,
    /// The true future gains with a fixed confidence.
    Perfect,
    /// No forecasts in the state, zero confidence.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub source: ForecastSource,
    /// Leading slots used to pretrain the predictors.
    pub pretrain_slots: usize,
    pub perfect_confidence: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            source: ForecastSource::Cpm,
            pretrain_slots: 500,
            perfect_confidence: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub train_start: usize,
    pub train_end: usize,
    pub eval_start: usize,
    pub eval_slots: usize,
    pub lags: Vec<usize>,
    /// `T_one` of the stability metric.
    pub switch_interval: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3],
            out_dir: PathBuf::from("out"),
            train_start: 500,
            train_end: 1700,
            eval_start: 1800,
            eval_slots: 100,
            lags: vec![0, 1],
            switch_interval: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub speeds_kmh: Vec<f64>,
    /// Actor learning rates; the critic uses `critic_ratio` times each.
    pub learning_rates: Vec<f64>,
    pub critic_ratio: f64,
    pub episodes: usize,
    /// Consecutive episodes that must stop within `l` steps.
    pub window: usize,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            speeds_kmh: vec![3.0, 30.0],
            learning_rates: vec![1e-4, 1e-3],
            critic_ratio: 10.0,
            episodes: 300,
            window: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub trace: TraceConfig,
    pub predictor: PredictorConfig,
    pub cpm: CpmConfig,
    pub agent: AgentConfig,
    pub reward: RewardParams,
    pub run: RunConfig,
    pub converge: ConvergeConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file; a relative trace path is resolved
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::Config(format!(
                    "config file {} not found",
                    path.display()
                )))
            }
            Err(_) => read_file(path)?,
        };
        let mut cfg = Self::from_toml(&text)?;
        if let Some(f) = cfg.trace.file.as_mut().filter(|f| f.is_relative()) {
            if let Some(dir) = path.parent() {
                *f = dir.join(&*f);
            }
        }
        if let Some(f) = &cfg.trace.file {
            if !f.exists() {
                return Err(Error::Config(format!(
                    "trace file {} not found",
                    f.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialisation.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        self.reward.validate()?;
        self.cpm.validate()?;
        if self.trace.file.is_none() {
            self.trace.synthetic.validate()?;
        }
        let fail = |m: String| Err(Error::Config(m));
        if self.trace.slots == 0 {
            return fail("trace.slots must be positive".into());
        }
        if self.predictor.source == ForecastSource::Cpm && self.cpm.horizon != self.agent.horizon {
            return fail(format!(
                "predictor horizon {} differs from agent horizon {}",
                self.cpm.horizon, self.agent.horizon
            ));
        }
        if !(0.0..=1.0).contains(&self.predictor.perfect_confidence) {
            return fail("predictor.perfect_confidence must lie in [0, 1]".into());
        }
        let r = &self.run;
        if r.seeds.is_empty() {
            return fail("run.seeds must list at least one seed".into());
        }
        if r.train_start >= r.train_end {
            return fail("run.train_start must precede run.train_end".into());
        }
        if r.eval_slots == 0 || r.switch_interval == 0 {
            return fail("run.eval_slots and run.switch_interval must be positive".into());
        }
        let c = &self.converge;
        if c.window == 0
            || c.episodes == 0
            || c.speeds_kmh.is_empty()
            || c.learning_rates.is_empty()
        {
            return fail("converge needs speeds, learning rates, episodes and a window".into());
        }
        if c.learning_rates
            .iter()
            .chain([&c.critic_ratio])
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return fail("converge learning rates and critic ratio must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ExperimentConfig::default();
        c.env.channels = 25;
        c.env.user_slots = 10;
        c.env.real_users = 10;
        c.predictor.source = ForecastSource::Perfect;
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(c.hash(), ExperimentConfig::default().hash());
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::from_toml("[agent]\ngama = 0.9\n"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml("[env]\nuser_slots = 9\n").is_err());
        assert!(ExperimentConfig::from_toml("[cpm]\nhorizon = 3\n").is_err());
        assert!(ExperimentConfig::from_toml("[run]\nseeds = []\n").is_err());
    }

    #[test]
    fn missing_trace_file_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[trace]\nfile = \"nope.csv\"\n").unwrap();
        assert!(matches!(ExperimentConfig::load(&p), Err(Error::Config(_))));
        assert!(matches!(
            ExperimentConfig::load(&dir.path().join("absent.toml")),
            Err(Error::Config(_))
        ));
    }
}
