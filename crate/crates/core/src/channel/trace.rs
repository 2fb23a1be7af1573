//! Channel-gain traces: storage, CSV I/O and synthetic generators.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    /// Sampling rate in Hz (one sample per slot).
    pub fs_hz: f64,
    pub fc_hz: f64,
    pub speed_kmh: f64,
}

impl TraceMeta {
    pub fn slot_seconds(&self) -> f64 {
        1.0 / self.fs_hz
    }

    /// Maximum Doppler shift in cycles per slot.
    pub fn doppler_per_slot(&self) -> f64 {
        doppler_per_slot(self.speed_kmh, self.fc_hz, self.fs_hz)
    }
}

pub fn doppler_per_slot(speed_kmh: f64, fc_hz: f64, fs_hz: f64) -> f64 {
    speed_kmh / 3.6 * fc_hz / SPEED_OF_LIGHT / fs_hz
}

/// `T × M` nonnegative gain magnitudes, row-major by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTrace {
    gains: Vec<f64>,
    slots: usize,
    channels: usize,
    pub meta: TraceMeta,
}

impl ChannelTrace {
    pub fn new(gains: Vec<f64>, slots: usize, channels: usize, meta: TraceMeta) -> Result<Self> {
        if slots == 0 || channels == 0 {
            return Err(Error::InvalidInput(
                "trace needs at least one slot and one channel".into(),
            ));
        }
        crate::error::check_len("trace gains", slots * channels, gains.len())?;
        if let Some(g) = gains.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "gain {g} is not a finite nonnegative value"
            )));
        }
        if !(meta.fs_hz > 0.0) {
            return Err(Error::InvalidInput("sampling rate must be positive".into()));
        }
        Ok(Self {
            gains,
            slots,
            channels,
            meta,
        })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn gain(&self, slot: usize, channel: usize) -> f64 {
        self.gains[slot * self.channels + channel]
    }

    pub fn row(&self, slot: usize) -> Result<&[f64]> {
        if slot >= self.slots {
            return Err(Error::EndOfTrace {
                slot,
                len: self.slots,
            });
        }
        Ok(&self.gains[slot * self.channels..(slot + 1) * self.channels])
    }

    pub fn column(&self, channel: usize) -> Vec<f64> {
        (0..self.slots).map(|t| self.gain(t, channel)).collect()
    }

    /// Root-mean-square gain over the whole trace.
    pub fn rms_gain(&self) -> f64 {
        (self.gains.iter().map(|g| g * g).sum::<f64>() / self.gains.len() as f64).sqrt()
    }

    /// Slots `[start, end)` as a new trace.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.slots {
            return Err(Error::EndOfTrace {
                slot: end,
                len: self.slots,
            });
        }
        Self::new(
            self.gains[start * self.channels..end * self.channels].to_vec(),
            end - start,
            self.channels,
            self.meta,
        )
    }

    pub fn to_csv(&self, header_comments: &[String]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fs={}", self.meta.fs_hz);
        let _ = writeln!(out, "# fc={}", self.meta.fc_hz);
        let _ = writeln!(out, "# v={}", self.meta.speed_kmh);
        for c in header_comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str("slot");
        for m in 1..=self.channels {
            let _ = write!(out, ",h_{m}");
        }
        out.push('\n');
        for t in 0..self.slots {
            let _ = write!(out, "{t}");
            for m in 0..self.channels {
                let _ = write!(out, ",{}", self.gain(t, m));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path, header_comments: &[String]) -> Result<()> {
        crate::io::write_file(path, &self.to_csv(header_comments))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    /// Parses the trace format. Complex entries `a+bj` are reduced to their magnitude.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let bad =
            |line: usize, reason: String| Error::parse(origin, format!("line {line}: {reason}"));
        let mut meta = TraceMeta {
            fs_hz: f64::NAN,
            fc_hz: f64::NAN,
            speed_kmh: f64::NAN,
        };
        let mut channels = None;
        let mut gains = Vec::new();
        let mut slots = 0usize;
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for kv in comment.split_whitespace() {
                    let Some((k, v)) = kv.split_once('=') else {
                        continue;
                    };
                    let slot = match k {
                        "fs" => &mut meta.fs_hz,
                        "fc" => &mut meta.fc_hz,
                        "v" => &mut meta.speed_kmh,
                        _ => continue,
                    };
                    *slot = v
                        .parse()
                        .map_err(|_| bad(lineno, format!("bad metadata value `{v}`")))?;
                }
                continue;
            }
            let Some(m) = channels else {
                let cols: Vec<&str> = line.split(',').map(str::trim).collect();
                if cols.first() != Some(&"slot") || cols.len() < 2 {
                    return Err(bad(lineno, "expected header `slot,h_1,...,h_M`".into()));
                }
                channels = Some(cols.len() - 1);
                continue;
            };
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != m + 1 {
                return Err(bad(
                    lineno,
                    format!("expected {} columns, found {}", m + 1, cols.len()),
                ));
            }
            for c in &cols[1..] {
                let g = parse_magnitude(c).ok_or_else(|| bad(lineno, format!("bad gain `{c}`")))?;
                if !(g.is_finite() && g >= 0.0) {
                    return Err(bad(
                        lineno,
                        format!("gain `{c}` is not finite and nonnegative"),
                    ));
                }
                gains.push(g);
            }
            slots += 1;
        }
        let channels = channels.ok_or_else(|| Error::parse(origin, "missing header row"))?;
        if slots == 0 {
            return Err(Error::parse(origin, "no data rows"));
        }
        if !(meta.fs_hz > 0.0) {
            return Err(Error::parse(origin, "missing or invalid `# fs=` metadata"));
        }
        if meta.fc_hz.is_nan() {
            meta.fc_hz = 0.0;
        }
        if meta.speed_kmh.is_nan() {
            meta.speed_kmh = 0.0;
        }
        Self::new(gains, slots, channels, meta)
    }
}

/// Real value or `a+bj` complex literal, as magnitude.
fn parse_magnitude(s: &str) -> Option<f64> {
    let s = s.trim();
    let Some(body) = s.strip_suffix('j').or_else(|| s.strip_suffix('i')) else {
        return s.parse::<f64>().ok().map(f64::abs);
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (body[..i].parse::<f64>().ok()?, parse_imag(&body[i..])?),
        None => (0.0, parse_imag(body)?),
    };
    Some(re.hypot(im))
}

fn parse_imag(s: &str) -> Option<f64> {
    match s {
        "+" | "" => Some(1.0),
        "-" => Some(-1.0),
        _ => s.parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Rayleigh-like fading from a sum of scattered paths with random angles and phases.
    SumOfSinusoids {
        paths: usize,
        /// Complex Gaussian noise standard deviation, relative to `scale`.
        noise: f64,
        /// Per-channel mean-gain spread in dB (uniform in ±spread).
        gain_spread_db: f64,
    },
    /// `x ← μ + φ(x − μ) + σ√(1−φ²)·ε`, clamped at zero.
    Autoregressive { phi: f64, relative_std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    /// Typical gain magnitude (path loss).
    pub scale: f64,
    pub meta: TraceMeta,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(
                "synthetic gain scale must be positive".into(),
            ));
        }
        if !(self.meta.fs_hz > 0.0) || self.meta.fc_hz < 0.0 || self.meta.speed_kmh < 0.0 {
            return Err(Error::Config(
                "trace metadata must be nonnegative with positive fs".into(),
            ));
        }
        match self.kind {
            SyntheticKind::SumOfSinusoids {
                paths,
                noise,
                gain_spread_db,
            } => {
                if paths == 0 || !(noise >= 0.0) || !(gain_spread_db >= 0.0) {
                    return Err(Error::Config(
                        "sum-of-sinusoids needs paths ≥ 1 and nonnegative noise/spread".into(),
                    ));
                }
            }
            SyntheticKind::Autoregressive { phi, relative_std } => {
                if !(0.0..1.0).contains(&phi) || !(relative_std >= 0.0) {
                    return Err(Error::Config(
                        "autoregressive needs φ in [0, 1) and σ ≥ 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-channel path amplitudes of the sum-of-sinusoids model.
pub fn path_amplitudes(spec: &SyntheticSpec, channel: usize, seed: u64) -> Vec<f64> {
    match spec.kind {
        SyntheticKind::SumOfSinusoids {
            paths,
            gain_spread_db,
            ..
        } => {
            let mut rng = keyed_rng(seed, &[0x5157, channel as u64]);
            let db = if gain_spread_db > 0.0 {
                rng.random_range(-gain_spread_db..=gain_spread_db)
            } else {
                0.0
            };
            let a = spec.scale * 10f64.powf(db / 20.0) / (paths as f64).sqrt();
            vec![a; paths]
        }
        SyntheticKind::Autoregressive { .. } => Vec::new(),
    }
}

pub fn generate_synthetic(
    spec: &SyntheticSpec,
    slots: usize,
    channels: usize,
    seed: u64,
) -> Result<ChannelTrace> {
    if slots == 0 || channels == 0 {
        return Err(Error::Config(
            "synthetic trace needs T ≥ 1 and M ≥ 1".into(),
        ));
    }
    spec.validate()?;
    let mut gains = vec![0.0; slots * channels];
    for m in 0..channels {
        let column = match spec.kind {
            SyntheticKind::SumOfSinusoids { paths, noise, .. } => {
                let amps = path_amplitudes(spec, m, seed);
                let mut rng = keyed_rng(seed, &[0x5151, m as u64]);
                let fd = spec.meta.doppler_per_slot();
                let waves: Vec<(f64, f64)> = (0..paths)
                    .map(|_| {
                        let angle: f64 = rng.random_range(0.0..2.0 * PI);
                        let phase: f64 = rng.random_range(0.0..2.0 * PI);
                        (2.0 * PI * fd * angle.cos(), phase)
                    })
                    .collect();
                let mut noise_rng = keyed_rng(seed, &[0x5152, m as u64]);
                (0..slots)
                    .map(|t| {
                        let (mut re, mut im) = (0.0, 0.0);
                        for (&a, &(w, phi)) in amps.iter().zip(&waves) {
                            let arg = w * t as f64 + phi;
                            re += a * arg.cos();
                            im += a * arg.sin();
                        }
                        if noise > 0.0 {
                            let n = noise * spec.scale / std::f64::consts::SQRT_2;
                            let e1: f64 = StandardNormal.sample(&mut noise_rng);
                            let e2: f64 = StandardNormal.sample(&mut noise_rng);
                            re += n * e1;
                            im += n * e2;
                        }
                        re.hypot(im)
                    })
                    .collect::<Vec<f64>>()
            }
            SyntheticKind::Autoregressive { phi, relative_std } => {
                let mut rng = keyed_rng(seed, &[0xA12, m as u64]);
                let mu = spec.scale;
                let sigma = relative_std * spec.scale;
                let innov = sigma * (1.0 - phi * phi).sqrt();
                let e0: f64 = StandardNormal.sample(&mut rng);
                let mut x = mu + sigma * e0;
                (0..slots)
                    .map(|t| {
                        if t > 0 {
                            let e: f64 = StandardNormal.sample(&mut rng);
                            x = mu + phi * (x - mu) + innov * e;
                        }
                        x.max(0.0)
                    })
                    .collect()
            }
        };
        for (t, g) in column.into_iter().enumerate() {
            gains[t * channels + m] = g;
        }
    }
    ChannelTrace::new(gains, slots, channels, spec.meta)
}
