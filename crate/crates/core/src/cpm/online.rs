//! Online operation: alternate incremental updates and forecasts over a series,
//! and build per-slot forecasts for a whole trace.

use std::fmt::Write as _;
use std::path::Path;

use super::confidence::{nmse, pooled_confidence, ConfidenceTracker, PredictionRecord};
use super::predictor::{ChannelPredictor, CpmConfig, LossCurve};
use crate::channel::{ChannelTrace, Forecasts};
use crate::error::{Error, Result};
use crate::rng::derive_seed;

/// Output of an online pass over `[start, end)`.
#[derive(Debug, Clone, Default)]
pub struct OnlineRun {
    /// `forecasts[i]` holds `l` values issued at slot `start + i` for the next `l` slots.
    pub forecasts: Vec<Vec<f64>>,
    pub records: Vec<PredictionRecord>,
    /// Slots at which an incremental update ran.
    pub il_slots: Vec<usize>,
}

impl OnlineRun {
    /// Records at one horizon whose target has been realised.
    pub fn realized_at(&self, horizon: usize) -> (Vec<f64>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.horizon == horizon)
            .filter_map(|r| r.realized.map(|v| (r.predicted, v)))
            .unzip()
    }

    /// All realised `(predicted, realized)` pairs across horizons.
    pub fn realized(&self) -> (Vec<f64>, Vec<f64>) {
        self.records
            .iter()
            .filter_map(|r| r.realized.map(|v| (r.predicted, v)))
            .unzip()
    }
}

/// At each slot `t` in `[start, end)`, with values up to `t` known: update on the
/// latest window every `l` slots (starting at `start`), then forecast `t+1..=t+l`.
pub fn run_online(
    predictor: &mut ChannelPredictor,
    series: &[f64],
    start: usize,
    end: usize,
) -> Result<OnlineRun> {
    let k = predictor.config().time_steps;
    let l = predictor.config().horizon;
    if start + 1 < k {
        return Err(Error::InsufficientData(format!(
            "online run starting at slot {start} has fewer than k = {k} past values"
        )));
    }
    if end > series.len() || start > end {
        return Err(Error::EndOfTrace {
            slot: end,
            len: series.len(),
        });
    }
    let mut run = OnlineRun::default();
    for t in start..end {
        if (t - start).is_multiple_of(l) {
            predictor.il_update(series, t)?;
            run.il_slots.push(t);
        }
        let preds = predictor.predict_multi(&series[t + 1 - k..=t], l)?;
        for (j, &p) in preds.iter().enumerate() {
            let slot = t + 1 + j;
            run.records.push(PredictionRecord {
                slot,
                horizon: j + 1,
                predicted: p,
                realized: series.get(slot).copied(),
            });
        }
        run.forecasts.push(preds);
    }
    Ok(run)
}

/// NMSE of the persistence forecast `x̂(t + h) = x(t)` for forecast origins in `[start, end)`.
pub fn persistence_nmse(series: &[f64], start: usize, end: usize, horizon: usize) -> f64 {
    let end = end.min(series.len().saturating_sub(horizon));
    if start >= end {
        return f64::NAN;
    }
    nmse(&series[start..end], &series[start + horizon..end + horizon])
}

/// Per-channel predictors pretrained on `[0, pretrain_slots)` and run online
/// over the rest of the trace.
#[derive(Debug, Clone)]
pub struct TraceForecast {
    pub forecasts: Forecasts,
    pub pretrain: Vec<LossCurve>,
    pub runs: Vec<OnlineRun>,
    pub predictors: Vec<ChannelPredictor>,
    pub pretrain_slots: usize,
}

pub fn forecast_trace(
    trace: &ChannelTrace,
    cfg: &CpmConfig,
    pretrain_slots: usize,
    seed: u64,
) -> Result<TraceForecast> {
    cfg.validate()?;
    let k = cfg.time_steps;
    let l = cfg.horizon;
    let m = trace.channels();
    let slots = trace.slots();
    if pretrain_slots < k + 1 || pretrain_slots > slots {
        return Err(Error::TraceTooShort {
            needed: (k + 1).max(pretrain_slots),
            available: slots,
        });
    }
    let mut gains = vec![0.0; slots * l * m];
    let mut pretrain = Vec::with_capacity(m);
    let mut runs = Vec::with_capacity(m);
    let mut predictors = Vec::with_capacity(m);
    for c in 0..m {
        let series = trace.column(c);
        let mut p = ChannelPredictor::new(cfg, derive_seed(seed, &[0xC9, c as u64]))?;
        pretrain.push(p.pretrain(&series[..pretrain_slots])?);
        // inside the pretraining span: frozen pretrained model, persistence for the first k−1 slots
        for t in 0..pretrain_slots {
            let preds = if t + 1 >= k {
                p.predict_multi(&series[t + 1 - k..=t], l)?
            } else {
                vec![series[t]; l]
            };
            for (j, v) in preds.into_iter().enumerate() {
                gains[(t * l + j) * m + c] = v;
            }
        }
        let run = run_online(&mut p, &series, pretrain_slots, slots)?;
        for (i, preds) in run.forecasts.iter().enumerate() {
            let t = pretrain_slots + i;
            for (j, &v) in preds.iter().enumerate() {
                gains[(t * l + j) * m + c] = v;
            }
        }
        log::debug!(
            "channel {c}: validation NMSE {:.4}, {} online updates",
            pretrain.last().map_or(f64::NAN, |p| p.validation_nmse),
            run.il_slots.len()
        );
        runs.push(run);
        predictors.push(p);
    }

    // ϱ(t) from one-step forecasts realised by slot t
    let mut trackers: Vec<ConfidenceTracker> = (0..m)
        .map(|_| {
            ConfidenceTracker::new(
                cfg.confidence_window,
                cfg.confidence_max,
                cfg.confidence_default,
            )
        })
        .collect();
    let mut confidence = vec![0.0; slots];
    for (t, conf) in confidence.iter_mut().enumerate().skip(pretrain_slots) {
        if t > pretrain_slots {
            for (c, tr) in trackers.iter_mut().enumerate() {
                let issued = &runs[c].forecasts[t - 1 - pretrain_slots];
                tr.push(issued[0], trace.gain(t, c));
            }
        }
        *conf = pooled_confidence(&trackers);
    }

    Ok(TraceForecast {
        forecasts: Forecasts::new(l, m, gains, confidence)?,
        pretrain,
        runs,
        predictors,
        pretrain_slots,
    })
}

/// `slot,horizon,predicted,realized,sq_error`; unrealised rows leave the last two empty.
pub fn prediction_log_csv(records: &[PredictionRecord], header_comments: &[String]) -> String {
    let mut out = String::new();
    for c in header_comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("slot,horizon,predicted,realized,sq_error\n");
    for r in records {
        match r.realized {
            Some(v) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.slot,
                    r.horizon,
                    r.predicted,
                    v,
                    (r.predicted - v).powi(2)
                );
            }
            None => {
                let _ = writeln!(out, "{},{},{},,", r.slot, r.horizon, r.predicted);
            }
        }
    }
    out
}

pub fn write_prediction_log(
    path: &Path,
    records: &[PredictionRecord],
    header_comments: &[String],
) -> Result<()> {
    crate::io::write_file(path, &prediction_log_csv(records, header_comments))
}

/// `iteration,train_loss,validation_loss`
pub fn loss_curve_csv(curve: &LossCurve, header_comments: &[String]) -> String {
    let mut out = String::new();
    for c in header_comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("iteration,train_loss,validation_loss\n");
    for (i, tr) in curve.train.iter().enumerate() {
        let v = curve
            .validation
            .get(i)
            .map_or(String::new(), f64::to_string);
        let _ = writeln!(out, "{},{},{}", i + 1, tr, v);
    }
    out
}
