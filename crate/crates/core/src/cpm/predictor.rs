//! Single-channel predictor: pretraining, incremental updates, one- and multi-step forecasts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::net::CpmNet;
use crate::error::{Error, Result};
use crate::nn::{HasParams, Optimizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CpmConfig {
    /// `k`: history length fed to the network.
    pub time_steps: usize,
    pub units: usize,
    /// `l`: prediction length (1 = single-point).
    pub horizon: usize,
    /// `N_IL`: samples in each incremental-learning window.
    pub il_window: usize,
    pub learning_rate: f64,
    pub pretrain_iters: usize,
    pub il_iters: usize,
    /// Share of the pretraining history used for training; the rest validates.
    pub train_fraction: f64,
    pub grad_clip: f64,
    /// `W`: realised one-step predictions in the confidence window.
    pub confidence_window: usize,
    pub confidence_max: f64,
    /// Confidence reported before `W` predictions have been realised.
    pub confidence_default: f64,
}

impl Default for CpmConfig {
    fn default() -> Self {
        Self {
            time_steps: 5,
            units: 5,
            horizon: 5,
            il_window: 200,
            learning_rate: 0.06,
            pretrain_iters: 200,
            il_iters: 1,
            train_fraction: 0.75,
            grad_clip: 5.0,
            confidence_window: 50,
            confidence_max: 0.95,
            confidence_default: 0.5,
        }
    }
}

impl CpmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_steps == 0 || self.units == 0 || self.horizon == 0 {
            return Err(Error::Config(
                "k, unit number and l must be at least 1".into(),
            ));
        }
        if self.il_window < self.time_steps + 1 {
            return Err(Error::Config(format!(
                "N_IL = {} must be at least k + 1 = {}",
                self.il_window,
                self.time_steps + 1
            )));
        }
        if !(self.learning_rate >= 0.0) || !(self.grad_clip > 0.0) {
            return Err(Error::Config(
                "learning rate must be ≥ 0 and clip > 0".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        if self.confidence_window == 0
            || !(0.0..=1.0).contains(&self.confidence_max)
            || !(0.0..=self.confidence_max).contains(&self.confidence_default)
        {
            return Err(Error::Config(
                "confidence window/max/default out of range".into(),
            ));
        }
        Ok(())
    }
}

/// Affine map of `[min, max]` onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: f64,
    pub max: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { min, max }
    }

    fn span(&self) -> f64 {
        let s = self.max - self.min;
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }

    pub fn forward(&self, x: f64) -> f64 {
        (x - self.min) / self.span()
    }

    pub fn inverse(&self, y: f64) -> f64 {
        self.min + y * self.span()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
    /// Validation MSE over the variance of validation targets, after training.
    pub validation_nmse: f64,
}

/// One entry of the incremental-learning log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IlEvent {
    /// Trained on samples `first..=last`.
    Updated {
        first: usize,
        last: usize,
        loss: f64,
    },
    /// Fewer than `N_IL` samples were available at `slot`.
    Deferred { slot: usize },
}

#[derive(Debug, Clone)]
pub struct ChannelPredictor {
    cfg: CpmConfig,
    net: CpmNet,
    opt: Optimizer,
    norm: Normalizer,
    il_log: Vec<IlEvent>,
}

/// Sliding `(k values → next value)` pairs over `series`.
fn sliding_pairs(series: &[f64], k: usize) -> (Vec<&[f64]>, Vec<f64>) {
    if series.len() <= k {
        return (Vec::new(), Vec::new());
    }
    let windows = (0..series.len() - k).map(|i| &series[i..i + k]).collect();
    let targets = series[k..].to_vec();
    (windows, targets)
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

impl ChannelPredictor {
    pub fn new(cfg: &CpmConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = CpmNet::new(cfg.time_steps, cfg.units, &mut rng)?;
        Ok(Self {
            cfg: cfg.clone(),
            net,
            opt: Optimizer::adam(cfg.learning_rate).with_clip_norm(cfg.grad_clip),
            norm: Normalizer { min: 0.0, max: 1.0 },
            il_log: Vec::new(),
        })
    }

    pub fn config(&self) -> &CpmConfig {
        &self.cfg
    }

    pub fn net(&self) -> &CpmNet {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut CpmNet {
        &mut self.net
    }

    pub fn normalizer(&self) -> Normalizer {
        self.norm
    }

    pub fn set_normalizer(&mut self, norm: Normalizer) {
        self.norm = norm;
    }

    pub fn il_log(&self) -> &[IlEvent] {
        &self.il_log
    }

    fn step_on(&mut self, windows: &[&[f64]], targets: &[f64]) -> Result<f64> {
        self.net.params_mut().zero_grad();
        let loss = self.net.accumulate_mse(windows, targets)?;
        match self.opt.step(self.net.params_mut()) {
            Ok(()) => Ok(loss),
            Err(Error::PoisonedUpdate(what)) => {
                log::warn!("predictor update skipped: non-finite {what}");
                Ok(loss)
            }
            Err(e) => Err(e),
        }
    }

    /// Fits the normaliser on `history` and trains on its leading share for
    /// `pretrain_iters` full-batch steps.
    pub fn pretrain(&mut self, history: &[f64]) -> Result<LossCurve> {
        let k = self.cfg.time_steps;
        if history.len() < k + 1 {
            return Err(Error::InsufficientData(format!(
                "pretraining needs at least k + 1 = {} values, got {}",
                k + 1,
                history.len()
            )));
        }
        if history.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite value in pretraining history".into(),
            ));
        }
        self.norm = Normalizer::fit(history);
        let scaled: Vec<f64> = history.iter().map(|&x| self.norm.forward(x)).collect();
        let split = ((scaled.len() as f64 * self.cfg.train_fraction).round() as usize)
            .clamp(k + 1, scaled.len());
        let (tw, tt) = sliding_pairs(&scaled[..split], k);
        // validation targets lie after the split; their inputs may reach back into it
        let val_start = split.saturating_sub(k);
        let (vw, vt) = sliding_pairs(&scaled[val_start..], k);

        let mut curve = LossCurve {
            train: Vec::with_capacity(self.cfg.pretrain_iters),
            validation: Vec::with_capacity(self.cfg.pretrain_iters),
            validation_nmse: f64::NAN,
        };
        for _ in 0..self.cfg.pretrain_iters {
            curve.train.push(self.step_on(&tw, &tt)?);
            if !vw.is_empty() {
                curve.validation.push(self.net.mse(&vw, &vt)?);
            }
        }
        if !vw.is_empty() {
            let mse = self.net.mse(&vw, &vt)?;
            let var = variance(&vt);
            curve.validation_nmse = if var > 0.0 { mse / var } else { mse };
        }
        Ok(curve)
    }

    /// Trains on `series[t − N_IL + 1 ..= t]`. Returns the loss, or `None` (and logs a
    /// deferral) when fewer than `N_IL` values exist.
    pub fn il_update(&mut self, series: &[f64], t: usize) -> Result<Option<f64>> {
        let n = self.cfg.il_window;
        if t >= series.len() {
            return Err(Error::EndOfTrace {
                slot: t,
                len: series.len(),
            });
        }
        if t + 1 < n {
            self.il_log.push(IlEvent::Deferred { slot: t });
            return Ok(None);
        }
        let first = t + 1 - n;
        let scaled: Vec<f64> = series[first..=t]
            .iter()
            .map(|&x| self.norm.forward(x))
            .collect();
        let (w, y) = sliding_pairs(&scaled, self.cfg.time_steps);
        let mut loss = f64::NAN;
        for _ in 0..self.cfg.il_iters {
            loss = self.step_on(&w, &y)?;
        }
        self.il_log.push(IlEvent::Updated {
            first,
            last: t,
            loss,
        });
        Ok(Some(loss))
    }

    pub fn predict_single(&self, last_k: &[f64]) -> Result<f64> {
        Ok(self.predict_multi(last_k, 1)?[0])
    }

    /// Recursive forecast: each prediction is appended to the input window.
    pub fn predict_multi(&self, last_k: &[f64], horizon: usize) -> Result<Vec<f64>> {
        if last_k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite value in predictor input".into(),
            ));
        }
        crate::error::check_len("predictor input", self.cfg.time_steps, last_k.len())?;
        let mut window: Vec<f64> = last_k.iter().map(|&x| self.norm.forward(x)).collect();
        let mut out = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let y = self.net.forward(&window)?;
            window.remove(0);
            window.push(y);
            out.push(self.norm.inverse(y).max(0.0));
        }
        Ok(out)
    }
}
