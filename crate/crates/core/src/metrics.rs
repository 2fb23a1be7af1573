//! Evaluation functionals over executed trajectories.

use std::fmt::Write as _;
use std::path::Path;

use crate::channel::StepOutcome;
use crate::error::{check_len, Error, Result};
use crate::io::{data_lines, read_file, write_file};

pub const TRAJECTORY_HEADER: &str = "slot,user,channel,rate,requirement,delta,served";
pub const SUMMARY_HEADER: &str =
    "method,mode,lag,kappa,mean_bias,S_ta_raw,S_ta_norm,mean_throughput";

/// One executed slot, restricted to the real users.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    pub channels: Vec<usize>,
    pub rates: Vec<f64>,
    pub requirements: Vec<f64>,
    pub deltas: Vec<f64>,
    pub served: Vec<bool>,
}

impl SlotRecord {
    pub fn theta(&self) -> f64 {
        service_success_rate_flags(&self.served)
    }

    /// Delivered rate summed over served users.
    pub fn throughput(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.served)
            .filter(|(_, &s)| s)
            .map(|(r, _)| r)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    users: usize,
    records: Vec<SlotRecord>,
}

impl Trajectory {
    pub fn new(users: usize) -> Self {
        Self {
            users,
            records: Vec::new(),
        }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[SlotRecord] {
        &self.records
    }

    pub fn push(&mut self, rec: SlotRecord) -> Result<()> {
        let n = self.users;
        for (what, len) in [
            ("trajectory channels", rec.channels.len()),
            ("trajectory rates", rec.rates.len()),
            ("trajectory requirements", rec.requirements.len()),
            ("trajectory deltas", rec.deltas.len()),
            ("trajectory served", rec.served.len()),
        ] {
            check_len(what, n, len)?;
        }
        if let Some(last) = self.records.last() {
            if rec.slot != last.slot + 1 {
                return Err(Error::InvalidInput(format!(
                    "trajectory slot {} does not follow slot {}",
                    rec.slot, last.slot
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    /// Appends the real-user part of an environment step.
    pub fn push_outcome(&mut self, out: &StepOutcome) -> Result<()> {
        let n = self.users;
        if out.channels.len() < n {
            return Err(Error::DimensionMismatch {
                context: "step outcome",
                expected: n,
                actual: out.channels.len(),
            });
        }
        self.push(SlotRecord {
            slot: out.slot,
            channels: out.channels[..n].to_vec(),
            rates: out.rates[..n].to_vec(),
            requirements: out.requirements[..n].to_vec(),
            deltas: out.deltas[..n].to_vec(),
            served: out.served[..n].to_vec(),
        })
    }

    /// First `t` slots.
    pub fn truncated(&self, t: usize) -> Trajectory {
        Trajectory {
            users: self.users,
            records: self.records[..t.min(self.records.len())].to_vec(),
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.records.iter().map(SlotRecord::theta).collect()
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.records.iter().map(SlotRecord::throughput).collect()
    }

    pub fn mean_throughput(&self) -> f64 {
        mean(&self.throughputs())
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        out.push_str(TRAJECTORY_HEADER);
        out.push('\n');
        for r in &self.records {
            for n in 0..self.users {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.slot,
                    n,
                    r.channels[n],
                    r.rates[n],
                    r.requirements[n],
                    r.deltas[n],
                    u8::from(r.served[n])
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        write_file(path, &self.to_csv(comments))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&read_file(path)?, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::parse(origin, format!("line {line}: {msg}"));
        let mut lines = data_lines(text);
        match lines.next() {
            Some((_, h)) if h.trim() == TRAJECTORY_HEADER => {}
            Some((i, h)) => return Err(bad(i, format!("unexpected header `{h}`"))),
            None => return Err(Error::parse(origin, "empty trajectory file")),
        }
        let mut rows: Vec<(usize, usize, usize, f64, f64, f64, bool)> = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 7 {
                return Err(bad(i, format!("expected 7 fields, found {}", f.len())));
            }
            let int = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| bad(i, format!("`{s}`: {e}")))
            };
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i, format!("`{s}`: {e}")));
            let served = match f[6] {
                "0" => false,
                "1" => true,
                s => return Err(bad(i, format!("served flag `{s}`"))),
            };
            rows.push((
                int(f[0])?,
                int(f[1])?,
                int(f[2])?,
                num(f[3])?,
                num(f[4])?,
                num(f[5])?,
                served,
            ));
        }
        let users = rows.iter().take_while(|r| r.0 == rows[0].0).count();
        if users == 0 || !rows.len().is_multiple_of(users) {
            return Err(Error::parse(origin, "rows do not form whole slots"));
        }
        let mut traj = Trajectory::new(users);
        for chunk in rows.chunks(users) {
            let slot = chunk[0].0;
            if chunk
                .iter()
                .enumerate()
                .any(|(n, r)| r.0 != slot || r.1 != n)
            {
                return Err(Error::parse(
                    origin,
                    format!("slot {slot} has malformed user rows"),
                ));
            }
            traj.push(SlotRecord {
                slot,
                channels: chunk.iter().map(|r| r.2).collect(),
                rates: chunk.iter().map(|r| r.3).collect(),
                requirements: chunk.iter().map(|r| r.4).collect(),
                deltas: chunk.iter().map(|r| r.5).collect(),
                served: chunk.iter().map(|r| r.6).collect(),
            })
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        }
        Ok(traj)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Fraction of users with nonnegative bias.
pub fn service_success_rate(deltas: &[f64]) -> f64 {
    if deltas.is_empty() {
        return 0.0;
    }
    deltas.iter().filter(|&&d| d >= 0.0).count() as f64 / deltas.len() as f64
}

/// Fraction of users served; collision losers carry a false flag.
pub fn service_success_rate_flags(served: &[bool]) -> f64 {
    if served.is_empty() {
        return 0.0;
    }
    served.iter().filter(|&&s| s).count() as f64 / served.len() as f64
}

/// Fraction of slots in which every user was served.
pub fn service_arrival_rate(thetas: &[f64]) -> f64 {
    if thetas.is_empty() {
        return 0.0;
    }
    thetas.iter().filter(|&&t| t == 1.0).count() as f64 / thetas.len() as f64
}

/// Relative performance loss of executing late; `None` when the lagged performance is zero.
pub fn non_instant_decision_error(rho_now: f64, rho_lagged: f64) -> Option<f64> {
    if rho_lagged == 0.0 {
        None
    } else {
        Some((rho_now - rho_lagged).abs() / rho_lagged)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSummary {
    /// Per-slot bias vectors.
    pub w: Vec<Vec<f64>>,
    pub mean: f64,
    pub min: f64,
}

/// Bias sequence over the first `t` slots.
pub fn ppqos_bias(traj: &Trajectory, t: usize) -> Result<BiasSummary> {
    if t > traj.len() {
        return Err(Error::TraceTooShort {
            needed: t,
            available: traj.len(),
        });
    }
    let w: Vec<Vec<f64>> = traj.records[..t].iter().map(|r| r.deltas.clone()).collect();
    let all: Vec<f64> = w.iter().flatten().copied().collect();
    Ok(BiasSummary {
        mean: mean(&all),
        min: all.iter().copied().fold(f64::INFINITY, f64::min),
        w,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityParams {
    pub switch_interval: usize,
}

/// Strict local extrema among interior points.
pub fn extreme_count(x: &[f64]) -> usize {
    x.windows(3)
        .filter(|w| (w[1] > w[0] && w[1] > w[2]) || (w[1] < w[0] && w[1] < w[2]))
        .count()
}

/// Unbiased sample variance; zero below two points.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn fluctuation(x: &[f64]) -> f64 {
    extreme_count(x) as f64 * sample_variance(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stability {
    /// Changed user-channel entries between consecutive window starts.
    pub switches: usize,
    pub windows: usize,
    /// Mean over users of rate fluctuation minus requirement fluctuation.
    pub fluctuation: f64,
    pub raw: f64,
}

/// Switching count × window count × mean excess fluctuation, over whole windows
/// of `switch_interval` slots; a trailing partial window is dropped.
pub fn service_stability(traj: &Trajectory, p: StabilityParams) -> Result<Stability> {
    let t_one = p.switch_interval;
    if t_one == 0 {
        return Err(Error::Config(
            "switch interval must be at least one slot".into(),
        ));
    }
    if traj.len() < 2 * t_one {
        return Err(Error::InsufficientData(format!(
            "stability needs {} slots, trajectory has {}",
            2 * t_one,
            traj.len()
        )));
    }
    let windows = traj.len() / t_one;
    let recs = &traj.records[..windows * t_one];
    let switches = (1..windows)
        .map(|j| {
            let (a, b) = (&recs[j * t_one].channels, &recs[(j - 1) * t_one].channels);
            a.iter().zip(b).filter(|(x, y)| x != y).count()
        })
        .sum();
    let n = traj.users;
    let fluct = (0..n)
        .map(|u| {
            let rates: Vec<f64> = recs.iter().map(|r| r.rates[u]).collect();
            let reqs: Vec<f64> = recs.iter().map(|r| r.requirements[u]).collect();
            fluctuation(&rates) - fluctuation(&reqs)
        })
        .sum::<f64>()
        / n as f64;
    Ok(Stability {
        switches,
        windows,
        fluctuation: fluct,
        raw: switches as f64 * windows as f64 * fluct,
    })
}

/// Min-max scaling to `[0, 1]`; all zeros when the values coincide.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub mode: String,
    pub lag: usize,
    pub kappa: f64,
    pub mean_bias: f64,
    pub s_ta_raw: f64,
    pub s_ta_norm: f64,
    pub mean_throughput: f64,
}

impl SummaryRow {
    /// Row for one trajectory; `s_ta_norm` is filled by [`normalize_stability`].
    pub fn evaluate(
        method: &str,
        mode: &str,
        lag: usize,
        traj: &Trajectory,
        p: StabilityParams,
    ) -> Result<Self> {
        Ok(Self {
            method: method.to_string(),
            mode: mode.to_string(),
            lag,
            kappa: service_arrival_rate(&traj.thetas()),
            mean_bias: ppqos_bias(traj, traj.len())?.mean,
            s_ta_raw: service_stability(traj, p)?.raw,
            s_ta_norm: 0.0,
            mean_throughput: traj.mean_throughput(),
        })
    }
}

pub fn normalize_stability(rows: &mut [SummaryRow]) {
    let raw: Vec<f64> = rows.iter().map(|r| r.s_ta_raw).collect();
    for (r, v) in rows.iter_mut().zip(min_max_normalize(&raw)) {
        r.s_ta_norm = v;
    }
}

pub fn summary_csv(rows: &[SummaryRow], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.mode,
            r.lag,
            r.kappa,
            r.mean_bias,
            r.s_ta_raw,
            r.s_ta_norm,
            r.mean_throughput
        );
    }
    out
}

/// `slot,throughput`
pub fn throughput_csv(traj: &Trajectory, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    out.push_str("slot,throughput\n");
    for r in traj.records() {
        let _ = writeln!(out, "{},{}", r.slot, r.throughput());
    }
    out
}
