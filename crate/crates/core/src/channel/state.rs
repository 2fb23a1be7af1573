//! Agent observation and per-slot channel forecasts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{data_lines, read_file, write_file};

/// `[S_ch (M rates), S_user (K requirements), S_pre (l·M predicted rates)]`, in bits/s.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub channel_rates: Vec<f64>,
    pub requirements: Vec<f64>,
    /// Row-major `l × M`: block `j` holds the forecast for slot `t + 1 + j`.
    pub predicted_rates: Vec<f64>,
}

impl SystemState {
    pub fn channels(&self) -> usize {
        self.channel_rates.len()
    }

    pub fn horizon(&self) -> usize {
        if self.channel_rates.is_empty() {
            0
        } else {
            self.predicted_rates.len() / self.channel_rates.len()
        }
    }

    pub fn len(&self) -> usize {
        self.channel_rates.len() + self.requirements.len() + self.predicted_rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.channel_rates);
        v.extend_from_slice(&self.requirements);
        v.extend_from_slice(&self.predicted_rates);
        v
    }

    /// Flattened state divided by `unit`.
    pub fn features(&self, unit: f64) -> Vec<f64> {
        self.to_vec().into_iter().map(|v| v / unit).collect()
    }

    /// Next state implied by the forecasts: the first predicted block becomes the
    /// channel rates, later blocks shift forward and the last block is repeated.
    /// Requirements are carried over unchanged. `None` without forecasts.
    pub fn predicted_next(&self) -> Option<SystemState> {
        let m = self.channels();
        let l = self.horizon();
        if l == 0 {
            return None;
        }
        let mut pre = Vec::with_capacity(l * m);
        pre.extend_from_slice(&self.predicted_rates[m..]);
        pre.extend_from_slice(&self.predicted_rates[(l - 1) * m..]);
        Some(SystemState {
            channel_rates: self.predicted_rates[..m].to_vec(),
            requirements: self.requirements.clone(),
            predicted_rates: pre,
        })
    }
}

/// Forecast gains for every slot of a trace: at slot `t`, `horizon × M` gains for
/// slots `t+1..=t+horizon`, plus the predictor confidence `ϱ(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecasts {
    horizon: usize,
    channels: usize,
    gains: Vec<f64>,
    confidence: Vec<f64>,
}

impl Forecasts {
    pub fn new(
        horizon: usize,
        channels: usize,
        gains: Vec<f64>,
        confidence: Vec<f64>,
    ) -> Result<Self> {
        crate::error::check_len(
            "forecast gains",
            confidence.len() * horizon * channels,
            gains.len(),
        )?;
        if gains.iter().chain(&confidence).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite forecast".into()));
        }
        Ok(Self {
            horizon,
            channels,
            gains,
            confidence,
        })
    }

    /// All-zero forecasts with zero confidence (predictor disabled).
    pub fn disabled(slots: usize, horizon: usize, channels: usize) -> Self {
        Self {
            horizon,
            channels,
            gains: vec![0.0; slots * horizon * channels],
            confidence: vec![0.0; slots],
        }
    }

    /// Oracle forecasts copied from the trace itself, with the given confidence;
    /// slots past the end repeat the last row.
    pub fn perfect(trace: &super::ChannelTrace, horizon: usize, confidence: f64) -> Self {
        let m = trace.channels();
        let slots = trace.slots();
        let mut gains = Vec::with_capacity(slots * horizon * m);
        for t in 0..slots {
            for j in 1..=horizon {
                let s = (t + j).min(slots - 1);
                gains.extend((0..m).map(|c| trace.gain(s, c)));
            }
        }
        Self {
            horizon,
            channels: m,
            gains,
            confidence: vec![confidence; slots],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn slots(&self) -> usize {
        self.confidence.len()
    }

    pub fn gains_at(&self, slot: usize) -> Result<&[f64]> {
        if slot >= self.slots() {
            return Err(Error::EndOfTrace {
                slot,
                len: self.slots(),
            });
        }
        let w = self.horizon * self.channels;
        Ok(&self.gains[slot * w..(slot + 1) * w])
    }

    pub fn confidence_at(&self, slot: usize) -> f64 {
        self.confidence.get(slot).copied().unwrap_or(0.0)
    }

    pub fn confidence(&self) -> &[f64] {
        &self.confidence
    }

    /// `slot,confidence,g1_1,…,gl_M` where `gj_c` is the forecast for slot `t + j`, channel `c`.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("slot,confidence");
        for j in 1..=self.horizon {
            for c in 1..=self.channels {
                let _ = write!(out, ",g{j}_{c}");
            }
        }
        out.push('\n');
        let w = self.horizon * self.channels;
        for (t, conf) in self.confidence.iter().enumerate() {
            let _ = write!(out, "{t},{conf}");
            for g in &self.gains[t * w..(t + 1) * w] {
                let _ = write!(out, ",{g}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        write_file(path, &self.to_csv(comments))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&read_file(path)?, path)
    }

    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let bad = |line: usize, why: &str| Error::parse(origin, format!("line {line}: {why}"));
        let mut lines = data_lines(text);
        let (hl, header) = lines.next().ok_or_else(|| bad(0, "empty file"))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "slot" || cols[1] != "confidence" {
            return Err(bad(hl, "expected a slot,confidence,g… header"));
        }
        let last = cols[cols.len() - 1];
        let (h, c) = last
            .strip_prefix('g')
            .and_then(|r| r.split_once('_'))
            .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
            .ok_or_else(|| bad(hl, "malformed forecast column name"))?;
        if h * c != cols.len() - 2 {
            return Err(bad(
                hl,
                "forecast columns do not form a horizon × channel grid",
            ));
        }
        let mut gains = Vec::new();
        let mut confidence = Vec::new();
        for (i, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| bad(i, &e.to_string()))?;
            if vals.len() != cols.len() {
                return Err(bad(i, "wrong number of fields"));
            }
            if vals[0] != confidence.len() as f64 {
                return Err(bad(i, "slots must be consecutive from 0"));
            }
            confidence.push(vals[1]);
            gains.extend_from_slice(&vals[2..]);
        }
        Self::new(h, c, gains, confidence)
    }

    /// Same forecasts with every confidence set to `value`.
    pub fn with_constant_confidence(mut self, value: f64) -> Self {
        self.confidence.iter_mut().for_each(|c| *c = value);
        self
    }
}
