mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dmca_core::baselines::Cadence;
use dmca_core::harness::{self, ExperimentConfig, Method, Session};
use dmca_core::io::write_file;
use dmca_core::Error;

use plot::{line_chart, Series};

#[derive(Parser)]
#[command(
    name = "dmca",
    version,
    about = "Dynamic multi-channel access experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the first configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Random,
    Exhaustive,
    Learning,
}

#[derive(Clone, Copy, ValueEnum)]
enum CadenceArg {
    OneSlot,
    LSlot,
}

#[derive(Subcommand)]
enum Command {
    /// Write the channel trace.
    GenTrace(Common),
    /// Pretrain per-channel predictors and write forecasts.
    PretrainCpm(Common),
    /// Train the agent.
    Train {
        #[command(flatten)]
        common: Common,
        /// Decision lag during training.
        #[arg(long, default_value_t = 0)]
        lag: usize,
    },
    /// Evaluate one method on the evaluation window.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "learning")]
        method: MethodArg,
        #[arg(long, value_enum, default_value = "one-slot")]
        cadence: CadenceArg,
        #[arg(long, default_value_t = 0)]
        lag: usize,
    },
    /// Every method under both cadences and all configured lags.
    Compare(Common),
    /// Convergence study with and without prediction.
    Converge(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::MissingCheckpoint(_) => 3,
        Error::TraceTooShort { .. } => 4,
        Error::Parse { .. } => 5,
        _ => 1,
    }
}

fn session(c: &Common) -> Result<Session, Error> {
    let cfg = ExperimentConfig::load(&c.config)?;
    Ok(Session::new(cfg, c.seed, c.out.clone()))
}

fn save_plot(path: &Path, svg: &str, written: &mut Vec<PathBuf>) {
    match write_file(path, svg) {
        Ok(()) => written.push(path.to_path_buf()),
        Err(e) => log::warn!("plot skipped: {e}"),
    }
}

fn run(cli: Cli) -> Result<Vec<PathBuf>, Error> {
    match cli.command {
        Command::GenTrace(c) => harness::gen_trace(&session(&c)?),
        Command::PretrainCpm(c) => {
            let s = session(&c)?;
            let written = harness::pretrain_cpm(&s)?;
            log::info!(
                "predictor summary in {}",
                s.out.join("cpm/nmse.csv").display()
            );
            Ok(written)
        }
        Command::Train { common, lag } => {
            let s = session(&common)?;
            let r = harness::train_cmd(&s, lag)?;
            if r.poisoned_updates > 0 {
                log::warn!(
                    "{} updates skipped on non-finite values",
                    r.poisoned_updates
                );
            }
            let mut written = r.written;
            let pts = |f: fn(&dmca_core::agent::EpisodeLog) -> f64| {
                r.log.iter().map(|e| (e.episode as f64, f(e))).collect()
            };
            let svg = line_chart(
                "Steps to stop",
                "episode",
                "steps",
                &[Series {
                    name: "steps".into(),
                    points: pts(|e| e.steps as f64),
                }],
            );
            save_plot(&s.out.join("episodes.svg"), &svg, &mut written);
            Ok(written)
        }
        Command::Eval {
            common,
            method,
            cadence,
            lag,
        } => {
            let s = session(&common)?;
            let method = match method {
                MethodArg::Random => Method::Random,
                MethodArg::Exhaustive => Method::Exhaustive,
                MethodArg::Learning => Method::Learning,
            };
            let cadence = match cadence {
                CadenceArg::OneSlot => Cadence::OneSlot,
                CadenceArg::LSlot => Cadence::LSlot(s.cfg.agent.horizon),
            };
            let r = harness::eval(&s, method, cadence, lag)?;
            for row in &r.rows {
                println!(
                    "{} {} lag {}: kappa {:.3} mean throughput {:.4e}",
                    row.method, row.mode, row.lag, row.kappa, row.mean_throughput
                );
            }
            Ok(r.written)
        }
        Command::Compare(c) => {
            let s = session(&c)?;
            let r = harness::compare(&s)?;
            for row in &r.rows {
                println!(
                    "{:<10} {:<8} lag {}: kappa {:.3} S_ta {:.3} mean throughput {:.4e}",
                    row.method, row.mode, row.lag, row.kappa, row.s_ta_norm, row.mean_throughput
                );
            }
            let mut written = r.written;
            let series: Vec<Series> = r
                .rows
                .iter()
                .zip(&r.trajectories)
                .filter(|(row, _)| row.lag == 0)
                .map(|(row, t)| Series {
                    name: format!("{} {}", row.method, row.mode),
                    points: t
                        .records()
                        .iter()
                        .map(|x| (x.slot as f64, x.throughput()))
                        .collect(),
                })
                .collect();
            let svg = line_chart("Throughput, no lag", "slot", "bits/s", &series);
            save_plot(&s.out.join("compare/throughput.svg"), &svg, &mut written);
            Ok(written)
        }
        Command::Converge(c) => {
            let s = session(&c)?;
            let r = harness::converge(&s)?;
            for cell in &r.cells {
                let m = cell
                    .median
                    .map_or("censored".to_string(), |m| m.to_string());
                println!(
                    "speed {} lr {} prediction {}: median convergence episode {m} ({}/{} censored)",
                    cell.speed_kmh, cell.learning_rate, cell.prediction, cell.censored, cell.runs
                );
            }
            let mut written = r.written;
            let series: Vec<Series> = r
                .runs
                .iter()
                .map(|run| Series {
                    name: format!(
                        "v={} lr={} {} seed {}",
                        run.speed_kmh,
                        run.learning_rate,
                        if run.prediction { "pred" } else { "no pred" },
                        run.seed
                    ),
                    points: harness::smoothed_median(&run.steps, s.cfg.converge.window)
                        .into_iter()
                        .enumerate()
                        .map(|(e, v)| (e as f64, v))
                        .collect(),
                })
                .collect();
            let svg = line_chart(
                "Steps to stop (trailing median)",
                "episode",
                "steps",
                &series,
            );
            save_plot(&s.out.join("converge/steps.svg"), &svg, &mut written);
            Ok(written)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DMCA_LOG", "info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(written) => {
            for p in written {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
