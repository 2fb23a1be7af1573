//! The experiment commands. Each writes its artifacts under the output directory
//! and returns what it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ForecastSource};
use crate::agent::{
    convergence_episode, episode_log_csv, train, Agent, AgentConfig, AgentPolicy, EpisodeLog,
    TrainSetup,
};
use crate::baselines::{schedule, Cadence, ExhaustivePolicy, Policy, PolicyMode, RandomPolicy};
use crate::channel::{generate_synthetic, ChannelTrace, Environment, Forecasts};
use crate::cpm::{forecast_trace, loss_curve_csv, nmse, persistence_nmse, prediction_log_csv};
use crate::error::{Error, Result};
use crate::io::{provenance, write_file};
use crate::metrics::{normalize_stability, summary_csv, StabilityParams, SummaryRow, Trajectory};
use crate::nn::{checkpoint, HasParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Random,
    Exhaustive,
    Learning,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Random, Method::Exhaustive, Method::Learning];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Random => "random",
            Method::Exhaustive => "exhaustive",
            Method::Learning => "learning",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method {s:?}; expected random, exhaustive or learning"
                ))
            })
    }
}

/// A loaded config bound to one seed and output directory.
#[derive(Debug, Clone)]
pub struct Session {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub seed: u64,
    pub out: PathBuf,
}

impl Session {
    /// `seed` defaults to the first configured seed, `out` to the configured directory.
    pub fn new(cfg: ExperimentConfig, seed: Option<u64>, out: Option<PathBuf>) -> Self {
        let hash = cfg.hash();
        let seed = seed.unwrap_or(cfg.run.seeds[0]);
        let out = out.unwrap_or_else(|| cfg.run.out_dir.clone());
        Self {
            cfg,
            hash,
            seed,
            out,
        }
    }

    pub fn comments(&self) -> Vec<String> {
        vec![provenance(&self.hash, self.seed)]
    }

    fn comments_for(&self, seed: u64) -> Vec<String> {
        vec![provenance(&self.hash, seed)]
    }

    pub fn trace(&self) -> Result<ChannelTrace> {
        self.trace_with(self.seed, None)
    }

    /// The configured trace, or a synthetic one at `speed_kmh` when given.
    fn trace_with(&self, seed: u64, speed_kmh: Option<f64>) -> Result<ChannelTrace> {
        let tc = &self.cfg.trace;
        let trace = match (&tc.file, speed_kmh) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("speed sweeps need a synthetic trace".into()));
            }
            (Some(f), None) => ChannelTrace::read_csv(f)?,
            (None, speed) => {
                let mut spec = tc.synthetic;
                if let Some(v) = speed {
                    spec.meta.speed_kmh = v;
                }
                generate_synthetic(&spec, tc.slots, self.cfg.env.channels, seed)?
            }
        };
        if trace.channels() != self.cfg.env.channels {
            return Err(Error::Config(format!(
                "trace has {} channels, env.channels is {}",
                trace.channels(),
                self.cfg.env.channels
            )));
        }
        Ok(trace)
    }

    pub fn environment(&self, trace: Arc<ChannelTrace>) -> Result<Environment> {
        Environment::new(&self.cfg.env, trace, self.seed)
    }

    pub fn forecasts_path(&self) -> PathBuf {
        self.out.join("forecasts.csv")
    }

    pub fn agent_dir(&self) -> PathBuf {
        self.out.join("agent")
    }

    /// Forecasts per the predictor source; the predictor output must exist on disk.
    pub fn forecasts(&self, trace: &ChannelTrace) -> Result<Option<Forecasts>> {
        match self.cfg.predictor.source {
            ForecastSource::None => Ok(None),
            ForecastSource::Perfect => Ok(Some(Forecasts::perfect(
                trace,
                self.cfg.agent.horizon,
                self.cfg.predictor.perfect_confidence,
            ))),
            ForecastSource::Cpm => {
                let path = self.forecasts_path();
                if !path.exists() {
                    return Err(Error::MissingCheckpoint(path));
                }
                let f = Forecasts::read_csv(&path)?;
                if f.slots() != trace.slots() || f.channels() != trace.channels() {
                    return Err(Error::Config(format!(
                        "{} does not match the trace; rerun pretrain-cpm",
                        path.display()
                    )));
                }
                Ok(Some(f))
            }
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        let mut a = self.cfg.agent.clone();
        a.use_prediction &= self.cfg.predictor.source != ForecastSource::None;
        a
    }

    fn stability(&self) -> StabilityParams {
        StabilityParams {
            switch_interval: self.cfg.run.switch_interval,
        }
    }
}

pub fn gen_trace(s: &Session) -> Result<Vec<PathBuf>> {
    let path = s.out.join("trace.csv");
    s.trace()?.write_csv(&path, &s.comments())?;
    Ok(vec![path])
}

/// Pretrains one predictor per channel, runs them online over the rest of the
/// trace and writes loss curves, prediction logs, checkpoints and forecasts.
pub fn pretrain_cpm(s: &Session) -> Result<Vec<PathBuf>> {
    let trace = s.trace()?;
    let cpm = &s.cfg.cpm;
    let tf = forecast_trace(&trace, cpm, s.cfg.predictor.pretrain_slots, s.seed)?;
    let dir = s.out.join("cpm");
    let comments = s.comments();
    let mut written = Vec::new();
    let mut table = String::new();
    for c in &comments {
        let _ = writeln!(table, "# {c}");
    }
    table.push_str("channel,validation_nmse,online_nmse_h1,online_nmse_hl,persistence_nmse_h1,persistence_nmse_hl\n");
    let l = cpm.horizon;
    for (c, ((curve, run), p)) in tf
        .pretrain
        .iter()
        .zip(&tf.runs)
        .zip(&tf.predictors)
        .enumerate()
    {
        let ch = c + 1;
        let loss = dir.join(format!("loss_ch{ch}.csv"));
        write_file(&loss, &loss_curve_csv(curve, &comments))?;
        let preds = dir.join(format!("predictions_ch{ch}.csv"));
        write_file(&preds, &prediction_log_csv(&run.records, &comments))?;
        let ckpt = dir.join(format!("channel_{ch}.params"));
        let norm = p.normalizer();
        let mut ck_comments = comments.clone();
        ck_comments.push(format!("normalizer min={} max={}", norm.min, norm.max));
        checkpoint::save(&ckpt, p.net().params(), &ck_comments)?;
        let series = trace.column(c);
        let (p1, r1) = run.realized_at(1);
        let (pl, rl) = run.realized_at(l);
        let start = tf.pretrain_slots;
        let _ = writeln!(
            table,
            "{ch},{},{},{},{},{}",
            curve.validation_nmse,
            nmse(&p1, &r1),
            nmse(&pl, &rl),
            persistence_nmse(&series, start, trace.slots(), 1),
            persistence_nmse(&series, start, trace.slots(), l)
        );
        written.extend([loss, preds, ckpt]);
    }
    let table_path = dir.join("nmse.csv");
    write_file(&table_path, &table)?;
    let fpath = s.forecasts_path();
    tf.forecasts.write_csv(&fpath, &comments)?;
    written.extend([table_path, fpath]);
    Ok(written)
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub log: Vec<EpisodeLog>,
    pub r_target: f64,
    pub poisoned_updates: usize,
    pub written: Vec<PathBuf>,
}

/// Trains an agent on the configured slot range and saves it with its episode log.
pub fn train_cmd(s: &Session, lag: usize) -> Result<TrainReport> {
    let trace = Arc::new(s.trace()?);
    let forecasts = s.forecasts(&trace)?;
    let mut env = s.environment(trace)?;
    let setup = TrainSetup {
        forecasts: forecasts.as_ref(),
        reward: s.cfg.reward,
        lag,
        slots: s.cfg.run.train_start..s.cfg.run.train_end,
        seed: s.seed,
    };
    let t = train(&mut env, &s.agent_config(), &setup)?;
    let mut comments = s.comments();
    comments.push(format!("lag={lag} r_target={}", t.r_target));
    let dir = s.agent_dir();
    t.agent.save(&dir, &comments)?;
    let log_path = s.out.join("episodes.csv");
    write_file(&log_path, &episode_log_csv(&t.log, &comments))?;
    Ok(TrainReport {
        log: t.log,
        r_target: t.r_target,
        poisoned_updates: t.poisoned_updates,
        written: vec![
            dir.join("actor.params"),
            dir.join("critic.params"),
            dir.join("agent.toml"),
            log_path,
        ],
    })
}

fn file_stem(method: Method, cadence: Cadence, lag: usize) -> String {
    format!("{}_{}_lag{lag}", method.label(), cadence.label())
}

/// Runs every requested cell on the evaluation window.
fn run_cells(
    s: &Session,
    cells: &[(Method, Cadence, usize)],
) -> Result<Vec<(Method, Cadence, usize, Trajectory)>> {
    let trace = Arc::new(s.trace()?);
    let needs_agent = cells.iter().any(|c| c.0 == Method::Learning);
    let (agent, forecasts) = if needs_agent {
        (Some(Agent::load(&s.agent_dir())?), s.forecasts(&trace)?)
    } else {
        (None, None)
    };
    let mut env = s.environment(trace)?;
    let mut out = Vec::with_capacity(cells.len());
    for &(method, cadence, lag) in cells {
        let mut policy: Box<dyn Policy + '_> = match method {
            Method::Random => Box::new(RandomPolicy::new(s.seed)),
            Method::Exhaustive => Box::new(ExhaustivePolicy),
            Method::Learning => Box::new(AgentPolicy {
                agent: agent
                    .as_ref()
                    .ok_or_else(|| Error::MissingCheckpoint(s.agent_dir()))?,
                forecasts: forecasts.as_ref(),
            }),
        };
        let mode = PolicyMode { cadence, lag };
        let run = schedule(
            policy.as_mut(),
            &mut env,
            mode,
            s.cfg.run.eval_start,
            s.cfg.run.eval_slots,
        )?;
        out.push((method, cadence, lag, run.trajectory));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<SummaryRow>,
    pub trajectories: Vec<Trajectory>,
    pub written: Vec<PathBuf>,
}

fn write_cells(
    s: &Session,
    dir: &Path,
    cells: Vec<(Method, Cadence, usize, Trajectory)>,
) -> Result<EvalReport> {
    let comments = s.comments();
    let mut rows = Vec::with_capacity(cells.len());
    let mut written = Vec::new();
    let mut trajectories = Vec::new();
    for (method, cadence, lag, traj) in cells {
        let path = dir.join(format!("traj_{}.csv", file_stem(method, cadence, lag)));
        traj.write_csv(&path, &comments)?;
        written.push(path);
        rows.push(SummaryRow::evaluate(
            method.label(),
            cadence.label(),
            lag,
            &traj,
            s.stability(),
        )?);
        trajectories.push(traj);
    }
    normalize_stability(&mut rows);
    let summary = dir.join("summary.csv");
    write_file(&summary, &summary_csv(&rows, &comments))?;
    written.push(summary);
    Ok(EvalReport {
        rows,
        trajectories,
        written,
    })
}

pub fn eval(s: &Session, method: Method, cadence: Cadence, lag: usize) -> Result<EvalReport> {
    let cells = run_cells(s, &[(method, cadence, lag)])?;
    let dir = s.out.join("eval").join(file_stem(method, cadence, lag));
    write_cells(s, &dir, cells)
}

/// Cadences compared: one-slot and every `l` slots.
pub fn cadences(cfg: &ExperimentConfig) -> [Cadence; 2] {
    [Cadence::OneSlot, Cadence::LSlot(cfg.agent.horizon)]
}

/// Every method under both cadences and every configured lag, plus a wide
/// per-slot throughput table.
pub fn compare(s: &Session) -> Result<EvalReport> {
    let mut cells = Vec::new();
    for m in Method::ALL {
        for c in cadences(&s.cfg) {
            for &lag in &s.cfg.run.lags {
                cells.push((m, c, lag));
            }
        }
    }
    let ran = run_cells(s, &cells)?;
    let dir = s.out.join("compare");
    let mut report = write_cells(s, &dir, ran)?;
    let mut text = String::new();
    for c in s.comments() {
        let _ = writeln!(text, "# {c}");
    }
    text.push_str("slot");
    for &(m, c, lag) in &cells {
        let _ = write!(text, ",{}", file_stem(m, c, lag));
    }
    text.push('\n');
    for i in 0..s.cfg.run.eval_slots {
        let _ = write!(text, "{}", s.cfg.run.eval_start + i);
        for t in &report.trajectories {
            let _ = write!(text, ",{}", t.records()[i].throughput());
        }
        text.push('\n');
    }
    let path = dir.join("throughput.csv");
    write_file(&path, &text)?;
    report.written.push(path);
    Ok(report)
}

/// One trained cell of the convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRun {
    pub speed_kmh: f64,
    pub learning_rate: f64,
    pub prediction: bool,
    pub seed: u64,
    pub steps: Vec<usize>,
    /// `None` when the run never converged (censored).
    pub converged_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeCell {
    pub speed_kmh: f64,
    pub learning_rate: f64,
    pub prediction: bool,
    /// Median convergence episode, censored runs ranking last; `None` if the median is censored.
    pub median: Option<f64>,
    pub censored: usize,
    pub runs: usize,
}

/// Median with `None` ranked above every value; `None` when the median falls on one.
pub fn censored_median(values: &[Option<usize>]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values
        .iter()
        .map(|x| x.map_or(f64::INFINITY, |e| e as f64))
        .collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let m = if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    m.is_finite().then_some(m)
}

/// Trailing median over `window` entries.
pub fn smoothed_median(values: &[usize], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let mut w: Vec<usize> = values[(i + 1).saturating_sub(window)..=i].to_vec();
            w.sort_unstable();
            let n = w.len();
            if n % 2 == 1 {
                w[n / 2] as f64
            } else {
                (w[n / 2 - 1] + w[n / 2]) as f64 / 2.0
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ConvergeReport {
    pub runs: Vec<ConvergeRun>,
    pub cells: Vec<ConvergeCell>,
    pub written: Vec<PathBuf>,
}

/// Trains from scratch for every speed × learning rate × (with, without) prediction × seed.
pub fn converge(s: &Session) -> Result<ConvergeReport> {
    let cc = &s.cfg.converge;
    let l = s.cfg.agent.horizon;
    let mut runs = Vec::new();
    for &speed in &cc.speeds_kmh {
        for &seed in &s.cfg.run.seeds {
            let trace = Arc::new(s.trace_with(seed, Some(speed))?);
            let forecasts = match s.cfg.predictor.source {
                ForecastSource::Cpm => {
                    forecast_trace(&trace, &s.cfg.cpm, s.cfg.predictor.pretrain_slots, seed)?
                        .forecasts
                }
                _ => Forecasts::perfect(&trace, l, s.cfg.predictor.perfect_confidence),
            };
            for &lr in &cc.learning_rates {
                for prediction in [true, false] {
                    let cfg = AgentConfig {
                        episodes: cc.episodes,
                        actor_lr: lr,
                        critic_lr: lr * cc.critic_ratio,
                        use_prediction: prediction,
                        ..s.cfg.agent.clone()
                    };
                    let mut env = Environment::new(&s.cfg.env, trace.clone(), seed)?;
                    let setup = TrainSetup {
                        forecasts: prediction.then_some(&forecasts),
                        reward: s.cfg.reward,
                        lag: 0,
                        slots: s.cfg.run.train_start..s.cfg.run.train_end,
                        seed,
                    };
                    let t = train(&mut env, &cfg, &setup)?;
                    let converged_at = convergence_episode(&t.log, l, cc.window);
                    log::info!("speed {speed} lr {lr} prediction {prediction} seed {seed}: converged at {converged_at:?}");
                    runs.push(ConvergeRun {
                        speed_kmh: speed,
                        learning_rate: lr,
                        prediction,
                        seed,
                        steps: t.log.iter().map(|e| e.steps).collect(),
                        converged_at,
                    });
                }
            }
        }
    }
    let mut cells = Vec::new();
    for &speed in &cc.speeds_kmh {
        for &lr in &cc.learning_rates {
            for prediction in [true, false] {
                let eps: Vec<Option<usize>> = runs
                    .iter()
                    .filter(|r| {
                        r.speed_kmh == speed && r.learning_rate == lr && r.prediction == prediction
                    })
                    .map(|r| r.converged_at)
                    .collect();
                cells.push(ConvergeCell {
                    speed_kmh: speed,
                    learning_rate: lr,
                    prediction,
                    median: censored_median(&eps),
                    censored: eps.iter().filter(|e| e.is_none()).count(),
                    runs: eps.len(),
                });
            }
        }
    }
    let written = write_converge(s, &runs, &cells)?;
    Ok(ConvergeReport {
        runs,
        cells,
        written,
    })
}

fn write_converge(
    s: &Session,
    runs: &[ConvergeRun],
    cells: &[ConvergeCell],
) -> Result<Vec<PathBuf>> {
    let dir = s.out.join("converge");
    let seeds: Vec<String> = s.cfg.run.seeds.iter().map(|x| x.to_string()).collect();
    let mut comments = s.comments_for(s.cfg.run.seeds[0]);
    comments.push(format!("seeds={}", seeds.join(" ")));
    let header = |out: &mut String| {
        for c in &comments {
            let _ = writeln!(out, "# {c}");
        }
    };
    let mut steps = String::new();
    header(&mut steps);
    steps.push_str("speed_kmh,learning_rate,prediction,seed,episode,steps,smoothed_steps\n");
    for r in runs {
        let smooth = smoothed_median(&r.steps, s.cfg.converge.window);
        for (e, (&n, m)) in r.steps.iter().zip(smooth).enumerate() {
            let _ = writeln!(
                steps,
                "{},{},{},{},{e},{n},{m}",
                r.speed_kmh, r.learning_rate, r.prediction, r.seed
            );
        }
    }
    let mut table = String::new();
    header(&mut table);
    table.push_str("speed_kmh,learning_rate,prediction,runs,censored,median_episode\n");
    for c in cells {
        let median = c
            .median
            .map_or_else(|| "censored".to_string(), |m| m.to_string());
        let _ = writeln!(
            table,
            "{},{},{},{},{},{median}",
            c.speed_kmh, c.learning_rate, c.prediction, c.runs, c.censored
        );
    }
    let (a, b) = (dir.join("steps.csv"), dir.join("summary.csv"));
    write_file(&a, &steps)?;
    write_file(&b, &table)?;
    Ok(vec![a, b])
}
