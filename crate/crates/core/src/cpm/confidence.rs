//! Prediction records and the confidence coefficient derived from them.

use std::collections::VecDeque;

/// A forecast for `slot` issued `horizon` slots earlier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub slot: usize,
    pub horizon: usize,
    pub predicted: f64,
    pub realized: Option<f64>,
}

impl PredictionRecord {
    pub fn sq_error(&self) -> Option<f64> {
        self.realized.map(|r| (self.predicted - r).powi(2))
    }
}

/// Mean squared error over the population variance of `realized`.
///
/// A constant realised series gives 0 for exact predictions and infinity otherwise.
pub fn nmse(predicted: &[f64], realized: &[f64]) -> f64 {
    let n = predicted.len().min(realized.len());
    if n == 0 {
        return f64::NAN;
    }
    let mse = predicted
        .iter()
        .zip(realized)
        .map(|(p, r)| (p - r).powi(2))
        .sum::<f64>()
        / n as f64;
    let mean = realized[..n].iter().sum::<f64>() / n as f64;
    let var = realized[..n]
        .iter()
        .map(|r| (r - mean).powi(2))
        .sum::<f64>()
        / n as f64;
    if var > 0.0 {
        mse / var
    } else if mse == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// `ϱ = clamp(1 − NMSE, 0, ϱ_max)`
pub fn confidence_from_nmse(nmse: f64, max: f64) -> f64 {
    if nmse.is_nan() {
        return 0.0;
    }
    (1.0 - nmse).clamp(0.0, max)
}

/// Sliding window of realised `(predicted, realized)` pairs.
#[derive(Debug, Clone)]
pub struct ConfidenceTracker {
    window: usize,
    max: f64,
    default: f64,
    pairs: VecDeque<(f64, f64)>,
}

impl ConfidenceTracker {
    pub fn new(window: usize, max: f64, default: f64) -> Self {
        Self {
            window: window.max(1),
            max,
            default,
            pairs: VecDeque::with_capacity(window),
        }
    }

    pub fn push(&mut self, predicted: f64, realized: f64) {
        if self.pairs.len() == self.window {
            self.pairs.pop_front();
        }
        self.pairs.push_back((predicted, realized));
    }

    pub fn is_warm(&self) -> bool {
        self.pairs.len() == self.window
    }

    /// Windowed NMSE, once the window is full.
    pub fn nmse(&self) -> Option<f64> {
        if !self.is_warm() {
            return None;
        }
        let (p, r): (Vec<f64>, Vec<f64>) = self.pairs.iter().copied().unzip();
        Some(nmse(&p, &r))
    }

    pub fn confidence(&self) -> f64 {
        self.nmse()
            .map_or(self.default, |e| confidence_from_nmse(e, self.max))
    }
}

/// Confidence across channels: mean of the per-channel windowed NMSE.
pub fn pooled_confidence(trackers: &[ConfidenceTracker]) -> f64 {
    let Some(first) = trackers.first() else {
        return 0.0;
    };
    let errs: Option<Vec<f64>> = trackers.iter().map(ConfidenceTracker::nmse).collect();
    match errs {
        Some(e) => confidence_from_nmse(e.iter().sum::<f64>() / e.len() as f64, first.max),
        None => first.default,
    }
}
