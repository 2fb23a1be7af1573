//! Acceptance run: prints one PASS/FAIL line per criterion.
//!
//! `cargo test -p dmca-core --release --test acceptance -- 2 9` runs a subset.
//! Failures are reported but the process exits zero unless
//! `DMCA_ACCEPTANCE_STRICT=1` is set.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use dmca_core::agent::convergence_episode;
use dmca_core::agent::{
    pddpg_target, train, AgentConfig, AgentPolicy, Ddpg, TrainSetup, Training, Transition,
};
use dmca_core::baselines::{
    exhaustive_assignment, schedule, Cadence, ExhaustivePolicy, PolicyMode, RandomPolicy,
};
use dmca_core::channel::{
    channel_rate, delay_sensitivity, generate_synthetic, ppqos_factor, ppqos_rate, ChannelTrace,
    EnvConfig, Environment, Forecasts, StreamingMode, SyntheticKind, SyntheticSpec, TraceMeta,
};
use dmca_core::cpm::{
    forecast_trace, nmse, persistence_nmse, run_online, ChannelPredictor, CpmConfig, CpmNet,
};
use dmca_core::metrics::{
    min_max_normalize, non_instant_decision_error, service_arrival_rate, service_stability,
    service_success_rate, SlotRecord, StabilityParams, Trajectory,
};
use dmca_core::nn::{grad_check, Activation, HasParams, Mlp, ParamSet};
use dmca_core::reward::{bsm_reward, final_reward, lsm_reward, RewardParams};
use dmca_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn median(v: &[f64]) -> f64 {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn fmt_list(v: &[f64], prec: usize) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.prec$}")).collect();
    format!("[{}]", s.join(", "))
}

// ---------------------------------------------------------------- 1

struct CriticModel {
    ddpg: Ddpg,
    batch: Vec<Transition>,
    targets: Vec<f64>,
}

impl HasParams for CriticModel {
    fn params(&self) -> &ParamSet {
        self.ddpg.critic.params()
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        self.ddpg.critic.params_mut()
    }
}

struct ActorModel {
    ddpg: Ddpg,
    states: Vec<Vec<f64>>,
}

impl HasParams for ActorModel {
    fn params(&self) -> &ParamSet {
        self.ddpg.actor.params()
    }
    fn params_mut(&mut self) -> &mut ParamSet {
        self.ddpg.actor.params_mut()
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, sd: usize, ad: usize) -> Vec<Transition> {
    (0..n)
        .map(|_| Transition {
            state: random_vec(rng, sd, -1.0, 1.0),
            action: random_vec(rng, ad, 0.05, 0.95),
            reward: rng.random_range(-1.0..1.0),
            next_state: random_vec(rng, sd, -1.0, 1.0),
            predicted_next: random_vec(rng, sd, -1.0, 1.0),
            confidence: rng.random_range(0.0..1.0),
        })
        .collect()
}

fn dense_check(rng: &mut ChaCha8Rng) -> Result<f64> {
    let acts = [
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Relu,
        Activation::Linear,
    ];
    let depth = rng.random_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| rng.random_range(1..=6)).collect();
    let hidden = acts[rng.random_range(0..acts.len())];
    let out = acts[rng.random_range(0..acts.len())];
    let mut m = Mlp::new("dense", &sizes, hidden, out, rng)?;
    let x = random_vec(rng, sizes[0], -1.0, 1.0);
    let target = random_vec(rng, *sizes.last().unwrap_or(&1), -1.0, 1.0);
    let loss = |m: &Mlp| -> Result<f64> {
        let y = m.forward(&x)?;
        Ok(0.5
            * y.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>())
    };
    let backward = |m: &mut Mlp| -> Result<()> {
        let mut tape = m.forward_recorded(&x)?;
        let y = m.forward(&x)?;
        let d: Vec<f64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        m.backward(&mut tape, &d).map(|_| ())
    };
    grad_check(&mut m, loss, backward, 1e-5)
}

fn lstm_check(rng: &mut ChaCha8Rng) -> Result<f64> {
    let k = rng.random_range(2..=6);
    let units = rng.random_range(1..=6);
    let mut net = CpmNet::new(k, units, rng)?;
    let series = random_vec(rng, k + 6, 0.0, 1.0);
    let windows: Vec<&[f64]> = (0..6).map(|i| &series[i..i + k]).collect();
    let targets: Vec<f64> = (0..6).map(|i| series[i + k]).collect();
    let loss = |n: &CpmNet| n.mse(&windows, &targets);
    let backward = |n: &mut CpmNet| n.accumulate_mse(&windows, &targets).map(|_| ());
    grad_check(&mut net, loss, backward, 1e-4)
}

fn small_agent_cfg(rng: &mut ChaCha8Rng) -> AgentConfig {
    AgentConfig {
        hidden: (0..rng.random_range(1..=2))
            .map(|_| rng.random_range(2..=6))
            .collect(),
        logit_penalty: if rng.random_bool(0.5) { 0.0 } else { 0.05 },
        ..AgentConfig::default()
    }
}

fn actor_check(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (sd, ad) = (rng.random_range(1..=5), rng.random_range(1..=3));
    let cfg = small_agent_cfg(rng);
    let ddpg = Ddpg::new(sd, ad, &cfg, rng)?;
    let states = (0..3).map(|_| random_vec(rng, sd, -1.0, 1.0)).collect();
    let c = cfg.logit_penalty;
    let mut m = ActorModel { ddpg, states };
    grad_check(
        &mut m,
        |m| {
            let mut tot = 0.0;
            for s in &m.states {
                let a = m.ddpg.actor.forward(s)?;
                tot -= m.ddpg.q(s, &a)?;
                tot += a
                    .iter()
                    .map(|&a| 0.5 * c * (a / (1.0 - a)).ln().powi(2))
                    .sum::<f64>();
            }
            Ok(tot / m.states.len() as f64)
        },
        |m| {
            let refs: Vec<&[f64]> = m.states.iter().map(|s| &s[..]).collect();
            m.ddpg.actor_gradient(&refs).map(|_| ())
        },
        1e-5,
    )
}

fn critic_check(rng: &mut ChaCha8Rng) -> Result<f64> {
    let (sd, ad) = (rng.random_range(1..=5), rng.random_range(1..=3));
    let cfg = small_agent_cfg(rng);
    let ddpg = Ddpg::new(sd, ad, &cfg, rng)?;
    let batch = random_batch(rng, 4, sd, ad);
    let refs: Vec<&Transition> = batch.iter().collect();
    let targets = ddpg.targets(&refs)?;
    let mut m = CriticModel {
        ddpg,
        batch,
        targets,
    };
    grad_check(
        &mut m,
        |m| {
            let mut tot = 0.0;
            for (t, y) in m.batch.iter().zip(&m.targets) {
                tot += (m.ddpg.q(&t.state, &t.action)? - y).powi(2);
            }
            Ok(tot / m.batch.len() as f64)
        },
        |m| {
            let refs: Vec<&Transition> = m.batch.iter().collect();
            let y = m.targets.clone();
            m.ddpg.critic_loss_gradient(&refs, &y).map(|_| ())
        },
        1e-5,
    )
}

type GradCheck = fn(&mut ChaCha8Rng) -> Result<f64>;
type CriterionFn = fn() -> Result<Check>;

fn criterion_1() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let kinds: [(&str, GradCheck); 4] = [
        ("dense", dense_check),
        ("lstm", lstm_check),
        ("actor", actor_check),
        ("critic", critic_check),
    ];
    let mut worst = Vec::new();
    for (name, f) in kinds {
        let mut w = 0.0f64;
        for _ in 0..5 {
            w = w.max(f(&mut rng)?);
        }
        worst.push(format!("{name} {w:.1e}"));
        if w > 1e-4 {
            return Ok(Check::new(
                false,
                format!("20 models, worst relative error: {}", worst.join(", ")),
            ));
        }
    }
    Ok(Check::new(
        true,
        format!("20 models, worst relative error: {}", worst.join(", ")),
    ))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Result<Check> {
    let mut errs: Vec<(&str, f64)> = Vec::new();
    // rate: B·log2(1 + g²P/σ²), evaluated through log2 directly
    let mut worst = 0.0f64;
    for &(g, b, p, n) in &[
        (1e-6, 78_125.0, 2500.0, 3.16e-13),
        (0.5, 1e6, 1.0, 1.0),
        (2.0, 10.0, 3.0, 0.5),
    ] {
        worst = worst.max(rel(
            channel_rate(g, b, p, n),
            b * (1.0 + g * g * p / n).log2(),
        ));
    }
    errs.push(("channel_rate", worst));
    errs.push((
        "delay_sensitivity gap 1",
        rel(delay_sensitivity(2.0, 1.0), 0.25),
    ));
    errs.push((
        "delay_sensitivity gap 0",
        rel(delay_sensitivity(3.0, 3.0), 0.5),
    ));
    let mut inv = 0.0f64;
    for lambda in [0.1, 0.37, 0.5, 0.99, 1.0] {
        inv = inv.max(rel(ppqos_rate(lambda, 1.0, 7.5)?, 7.5));
    }
    errs.push(("ppqos beta 1", inv));
    errs.push(("ppqos factor", rel(ppqos_factor(1.0, 0.8), 1.2)));
    errs.push(("ppqos rate", rel(ppqos_rate(1.0, 0.8, 10.0)?, 12.0)));
    let p = RewardParams::default();
    errs.push((
        "lsm zero surplus",
        rel(lsm_reward(&[0.0; 3], 1.0, &p), 5.0 * PI / 2.0),
    ));
    errs.push(("bsm zero surplus", bsm_reward(&[0.0; 3], 1.0, &p).abs()));
    errs.push(("collision", rel(final_reward(true, 3.0, &p), -100.0)));
    errs.push(("no collision", rel(final_reward(false, 3.0, &p), 3.0)));
    errs.push((
        "target example",
        rel(pddpg_target(1.0, 0.92, 0.5, 2.0, 3.0, false), 3.42),
    ));
    let mut red = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let (r, g, q, qp) = (
            rng.random_range(-5.0..5.0),
            rng.random_range(0.0..1.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        red = red.max(rel(pddpg_target(r, g, 0.0, q, qp, false), r + g * q));
        red = red.max(rel(pddpg_target(r, g, 0.0, q, qp, true), r + g * q));
    }
    errs.push(("target without confidence", red));
    let bad: Vec<String> = errs
        .iter()
        .filter(|(_, e)| e.is_nan() || *e > 1e-9)
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    if bad.is_empty() {
        Ok(Check::new(
            true,
            format!("{} oracles, worst relative error {worst:.1e}", errs.len()),
        ))
    } else {
        Ok(Check::new(false, format!("off: {}", bad.join(", "))))
    }
}

// ---------------------------------------------------------------- 3

fn brute_force(rates: &[f64], reqs: &[f64], mode: StreamingMode) -> Vec<usize> {
    fn score(rates: &[f64], reqs: &[f64], a: &[usize], mode: StreamingMode) -> (usize, f64) {
        let mut sat = 0;
        let mut sec = 0.0;
        for (u, &c) in a.iter().enumerate() {
            let d = rates[c] - reqs[u];
            match mode {
                StreamingMode::Lsm => {
                    if d >= 0.0 {
                        sat += 1;
                        sec += d;
                    }
                }
                StreamingMode::Bsm => {
                    if d >= 0.0 {
                        sat += 1;
                    }
                    sec += d;
                }
            }
        }
        (sat, sec)
    }
    fn walk(
        rates: &[f64],
        reqs: &[f64],
        mode: StreamingMode,
        cur: &mut Vec<usize>,
        best: &mut Option<(Vec<usize>, (usize, f64))>,
    ) {
        if cur.len() == reqs.len() {
            let s = score(rates, reqs, cur, mode);
            let better = match best {
                None => true,
                Some((_, b)) => {
                    s.0 > b.0
                        || (s.0 == b.0
                            && match mode {
                                StreamingMode::Lsm => s.1 < b.1,
                                StreamingMode::Bsm => s.1 > b.1,
                            })
                }
            };
            if better {
                *best = Some((cur.clone(), s));
            }
            return;
        }
        for c in 0..rates.len() {
            if !cur.contains(&c) {
                cur.push(c);
                walk(rates, reqs, mode, cur, best);
                cur.pop();
            }
        }
    }
    let mut best = None;
    walk(rates, reqs, mode, &mut Vec::new(), &mut best);
    best.map(|b| b.0).unwrap_or_default()
}

fn criterion_3() -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut mismatches = 0;
    let mut ties = 0;
    let total = 1000;
    for i in 0..total {
        let m = rng.random_range(1..=7);
        let n = rng.random_range(1..=m.min(4));
        // every third instance draws from a small grid so that ties are common
        let grid = i % 3 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if grid {
                rng.random_range(0..4) as f64
            } else {
                rng.random_range(0.0..10.0)
            }
        };
        let rates: Vec<f64> = (0..m).map(|_| draw(&mut rng)).collect();
        let reqs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        for mode in [StreamingMode::Lsm, StreamingMode::Bsm] {
            let got = exhaustive_assignment(&rates, &reqs, mode)?;
            let want = brute_force(&rates, &reqs, mode);
            if grid {
                ties += 1;
            }
            if got != want {
                mismatches += 1;
            }
        }
    }
    Ok(Check::new(
        mismatches == 0,
        format!(
            "{total} instances x 2 modes ({ties} on a tie-prone grid), {mismatches} mismatches"
        ),
    ))
}

// ---------------------------------------------------------------- 4

fn sinusoid_spec(speed_kmh: f64) -> SyntheticSpec {
    SyntheticSpec {
        kind: SyntheticKind::SumOfSinusoids {
            paths: 8,
            noise: 0.0,
            gain_spread_db: 6.0,
        },
        scale: 1e-6,
        meta: TraceMeta {
            fs_hz: 1000.0,
            fc_hz: 2.0e9,
            speed_kmh,
        },
    }
}

fn criterion_4() -> Result<Check> {
    let (slots, split, speed) = (8000, 6400, 3.0);
    let spec = sinusoid_spec(speed);
    let mut sp = Vec::new();
    let mut pers = Vec::new();
    let horizons = [5usize, 10, 16];
    let mut per_h: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
    for seed in 1..=5u64 {
        let series = generate_synthetic(&spec, slots, 1, seed)?.column(0);
        let cfg = CpmConfig {
            horizon: 1,
            ..CpmConfig::default()
        };
        let mut p = ChannelPredictor::new(&cfg, seed)?;
        p.pretrain(&series[..split])?;
        let run = run_online(&mut p, &series, split, slots - 1)?;
        let (a, b) = run.realized_at(1);
        sp.push(nmse(&a, &b));
        pers.push(persistence_nmse(&series, split, slots - 1, 1));
        for (i, &l) in horizons.iter().enumerate() {
            let cfg = CpmConfig {
                horizon: l,
                ..CpmConfig::default()
            };
            let mut p = ChannelPredictor::new(&cfg, seed)?;
            p.pretrain(&series[..split])?;
            let run = run_online(&mut p, &series, split, slots - l)?;
            let (a, b) = run.realized_at(l);
            per_h[i].push(nmse(&a, &b));
        }
    }
    let (m_sp, m_pers) = (median(&sp), median(&pers));
    let wins = sp.iter().zip(&pers).filter(|(a, b)| a < b).count();
    let m_h: Vec<f64> = per_h.iter().map(|v| median(v)).collect();
    let monotone = m_h.windows(2).all(|w| w[1] >= w[0]);
    let pass = m_sp <= 0.05 && m_sp < m_pers && monotone;
    Ok(Check::new(
        pass,
        format!(
            "{speed} km/h, 5 seeds: one-step NMSE {m_sp:.4} vs persistence {m_pers:.4} (better on {wins}/5 seeds); multi-step NMSE at l = 5, 10, 16: {}",
            fmt_list(&m_h, 3)
        ),
    ))
}

// ------------------------------------------------------- shared training

struct Scenario {
    speed_kmh: f64,
    xi: (f64, f64),
    lag: usize,
    episodes: usize,
    max_steps: usize,
}

struct Trained {
    env: Environment,
    forecasts: Forecasts,
    training: Training,
}

const SLOTS: usize = 2000;
const PRETRAIN: usize = 500;
const TRAIN_END: usize = 1700;
const EVAL_START: usize = 1800;
const EVAL_SLOTS: usize = 100;

fn desk_reward() -> RewardParams {
    RewardParams {
        w3: -1.0,
        ..RewardParams::default()
    }
}

fn desk_agent(episodes: usize, max_steps: usize) -> AgentConfig {
    AgentConfig {
        hidden: vec![64, 64],
        episodes,
        max_steps,
        noise_decay: 0.98,
        noise_floor: 0.02,
        discount_predicted: true,
        ..AgentConfig::default()
    }
}

fn setting(sc: &Scenario, seed: u64) -> Result<(Environment, Forecasts)> {
    let trace: Arc<ChannelTrace> = Arc::new(generate_synthetic(
        &sinusoid_spec(sc.speed_kmh),
        SLOTS,
        8,
        seed,
    )?);
    let forecasts = forecast_trace(&trace, &CpmConfig::default(), PRETRAIN, seed)?.forecasts;
    let env_cfg = EnvConfig {
        xi_low: sc.xi.0,
        xi_high: sc.xi.1,
        ..EnvConfig::default()
    };
    Ok((Environment::new(&env_cfg, trace, seed)?, forecasts))
}

fn train_scenario(sc: &Scenario, seed: u64) -> Result<Trained> {
    let (mut env, forecasts) = setting(sc, seed)?;
    let setup = TrainSetup {
        forecasts: Some(&forecasts),
        reward: desk_reward(),
        lag: sc.lag,
        slots: PRETRAIN..TRAIN_END,
        seed,
    };
    let training = train(&mut env, &desk_agent(sc.episodes, sc.max_steps), &setup)?;
    Ok(Trained {
        env,
        forecasts,
        training,
    })
}

#[derive(Clone, Copy)]
struct Eval {
    kappa: f64,
    throughput: f64,
}

fn eval_learning(t: &mut Trained, cadence: Cadence, lag: usize) -> Result<Eval> {
    let mut p = AgentPolicy {
        agent: &t.training.agent,
        forecasts: Some(&t.forecasts),
    };
    let run = schedule(
        &mut p,
        &mut t.env,
        PolicyMode { cadence, lag },
        EVAL_START,
        EVAL_SLOTS,
    )?;
    Ok(Eval {
        kappa: service_arrival_rate(&run.trajectory.thetas()),
        throughput: run.trajectory.mean_throughput(),
    })
}

fn eval_exhaustive(env: &mut Environment, cadence: Cadence, lag: usize) -> Result<Eval> {
    let run = schedule(
        &mut ExhaustivePolicy,
        env,
        PolicyMode { cadence, lag },
        EVAL_START,
        EVAL_SLOTS,
    )?;
    Ok(Eval {
        kappa: service_arrival_rate(&run.trajectory.thetas()),
        throughput: run.trajectory.mean_throughput(),
    })
}

fn eval_random(env: &mut Environment, seed: u64) -> Result<Eval> {
    let mode = PolicyMode {
        cadence: Cadence::OneSlot,
        lag: 0,
    };
    let run = schedule(
        &mut RandomPolicy::new(seed),
        env,
        mode,
        EVAL_START,
        EVAL_SLOTS,
    )?;
    Ok(Eval {
        kappa: service_arrival_rate(&run.trajectory.thetas()),
        throughput: run.trajectory.mean_throughput(),
    })
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Result<Check> {
    let sc = Scenario {
        speed_kmh: 3.0,
        xi: (0.3, 0.9),
        lag: 0,
        episodes: 300,
        max_steps: 600,
    };
    let (mut first, mut last, mut kappa, mut exh, mut rnd) =
        (vec![], vec![], vec![], vec![], vec![]);
    for seed in 1..=3u64 {
        let mut t = train_scenario(&sc, seed)?;
        let steps: Vec<f64> = t.training.log.iter().map(|e| e.steps as f64).collect();
        first.push(median(&steps[..50]));
        last.push(median(&steps[steps.len() - 50..]));
        kappa.push(eval_learning(&mut t, Cadence::OneSlot, 0)?.kappa);
        exh.push(eval_exhaustive(&mut t.env, Cadence::OneSlot, 0)?.kappa);
        rnd.push(eval_random(&mut t.env, seed)?.kappa);
    }
    let (f, l, k) = (median(&first), median(&last), median(&kappa));
    let progress = l < f;
    let pass = progress && k >= 0.9;
    Ok(Check::new(
        pass,
        format!(
            "steps-to-stop median {f} -> {l} ({}); kappa {k:.2} per seed {} ({}), exhaustive {:.2}, random {:.2}",
            if progress { "ok" } else { "no progress" },
            fmt_list(&kappa, 2),
            if k >= 0.9 { "ok" } else { "below 0.9" },
            median(&exh),
            median(&rnd)
        ),
    ))
}

// ------------------------------------------------------------- 6 and 7

struct FastCells {
    learning_lag: [Vec<f64>; 2],
    exhaustive_lag: [Vec<f64>; 2],
    exh_one: Vec<f64>,
    exh_l: Vec<f64>,
    learn_l: Vec<f64>,
}

fn fast_cells() -> Result<FastCells> {
    let sc = Scenario {
        speed_kmh: 120.0,
        xi: (0.3, 0.9),
        lag: 1,
        episodes: 300,
        max_steps: 400,
    };
    let l = desk_agent(1, 1).horizon;
    let cadences = [Cadence::OneSlot, Cadence::LSlot(l)];
    let mut c = FastCells {
        learning_lag: [vec![], vec![]],
        exhaustive_lag: [vec![], vec![]],
        exh_one: vec![],
        exh_l: vec![],
        learn_l: vec![],
    };
    for seed in 1..=3u64 {
        let mut t = train_scenario(&sc, seed)?;
        for (i, &cad) in cadences.iter().enumerate() {
            c.learning_lag[i].push(eval_learning(&mut t, cad, 1)?.kappa);
            c.exhaustive_lag[i].push(eval_exhaustive(&mut t.env, cad, 1)?.kappa);
        }
        c.exh_one
            .push(eval_exhaustive(&mut t.env, Cadence::OneSlot, 0)?.throughput);
        c.exh_l
            .push(eval_exhaustive(&mut t.env, Cadence::LSlot(l), 0)?.throughput);
        c.learn_l
            .push(eval_learning(&mut t, Cadence::LSlot(l), 0)?.throughput);
    }
    Ok(c)
}

fn criterion_6(c: &FastCells) -> Check {
    let names = ["one-slot", "l-slot"];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let (a, e) = (median(&c.learning_lag[i]), median(&c.exhaustive_lag[i]));
        pass &= a >= e;
        parts.push(format!("{name} kappa learning {a:.2} vs exhaustive {e:.2}"));
    }
    Check::new(
        pass,
        format!("120 km/h, lag 1, 3 seeds: {}", parts.join("; ")),
    )
}

fn criterion_7(c: &FastCells) -> Check {
    let learn: Vec<f64> = c
        .exh_one
        .iter()
        .zip(&c.learn_l)
        .map(|(a, b)| a - b)
        .collect();
    let exh: Vec<f64> = c.exh_one.iter().zip(&c.exh_l).map(|(a, b)| a - b).collect();
    let (dl, de) = (median(&learn), median(&exh));
    Check::new(
        dl < de,
        format!(
            "120 km/h, 3 seeds: l-slot throughput deficit vs one-slot exhaustive {:.3e}: learning {dl:.3e}, exhaustive {de:.3e}",
            median(&c.exh_one)
        ),
    )
}

// ---------------------------------------------------------------- 8

fn bit_exact_without_confidence() -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let cfg = AgentConfig {
        hidden: vec![8, 8],
        ..AgentConfig::default()
    };
    let base = Ddpg::new(4, 2, &cfg, &mut rng)?;
    let mut batch = random_batch(&mut rng, 16, 4, 2);
    batch.iter_mut().for_each(|t| t.confidence = 0.0);
    let refs: Vec<&Transition> = batch.iter().collect();

    // standard target computed by hand from the target networks
    let targets = base.targets(&refs)?;
    for (t, y) in batch.iter().zip(&targets) {
        let a = base.actor_target.forward(&t.next_state)?;
        let mut sa = t.next_state.clone();
        sa.extend(&a);
        let q = base.critic_target.forward(&sa)?[0];
        if (t.reward + cfg.gamma * q).to_bits() != y.to_bits() {
            return Ok(false);
        }
    }

    // the predicted successor cannot influence an update at zero confidence
    let mut scrambled = batch.clone();
    for t in &mut scrambled {
        t.predicted_next.iter_mut().for_each(|v| *v = f64::NAN);
    }
    let (mut a, mut b) = (base.clone(), base);
    for _ in 0..3 {
        a.train_step(&batch.iter().collect::<Vec<_>>())?;
        b.train_step(&scrambled.iter().collect::<Vec<_>>())?;
    }
    Ok(a.actor.params() == b.actor.params() && a.critic.params() == b.critic.params())
}

fn criterion_8() -> Result<Check> {
    let exact = bit_exact_without_confidence()?;
    let sc = Scenario {
        speed_kmh: 3.0,
        xi: (0.05, 0.2),
        lag: 0,
        episodes: 150,
        max_steps: 100,
    };
    let base = desk_agent(sc.episodes, sc.max_steps);
    let (l, window) = (base.horizon, 10);
    let lrs = [1e-4, 1e-3];
    let mut cells = Vec::new();
    let mut pass = exact;
    for &lr in &lrs {
        let mut med = [0.0f64; 2];
        let mut censored = [0usize; 2];
        for (j, prediction) in [true, false].into_iter().enumerate() {
            let mut eps = Vec::new();
            for seed in 1..=3u64 {
                let (mut env, forecasts) = setting(&sc, seed)?;
                let cfg = AgentConfig {
                    actor_lr: lr,
                    critic_lr: lr * 10.0,
                    use_prediction: prediction,
                    ..base.clone()
                };
                let setup = TrainSetup {
                    forecasts: prediction.then_some(&forecasts),
                    reward: desk_reward(),
                    lag: 0,
                    slots: PRETRAIN..TRAIN_END,
                    seed,
                };
                let t = train(&mut env, &cfg, &setup)?;
                // censored runs rank after every converged one
                eps.push(
                    convergence_episode(&t.log, l, window).map_or(f64::INFINITY, |e| e as f64),
                );
            }
            censored[j] = eps.iter().filter(|e| e.is_infinite()).count();
            med[j] = median(&eps);
        }
        pass &= med[0] <= med[1];
        let show = |m: f64| {
            if m.is_finite() {
                format!("{m}")
            } else {
                "censored".into()
            }
        };
        cells.push(format!(
            "lr {lr:e}: with {} ({}/3 censored), without {} ({}/3 censored)",
            show(med[0]),
            censored[0],
            show(med[1]),
            censored[1]
        ));
    }
    Ok(Check::new(
        pass,
        format!(
            "zero-confidence equivalence {}; median convergence episode, 3 km/h: {}",
            if exact { "bit-exact" } else { "differs" },
            cells.join("; ")
        ),
    ))
}

// ---------------------------------------------------------------- 9

fn record(slot: usize, channels: [usize; 2], rates: [f64; 2], reqs: [f64; 2]) -> SlotRecord {
    let deltas: Vec<f64> = rates.iter().zip(&reqs).map(|(r, q)| r - q).collect();
    SlotRecord {
        slot,
        channels: channels.to_vec(),
        rates: rates.to_vec(),
        requirements: reqs.to_vec(),
        served: deltas.iter().map(|&d| d >= 0.0).collect(),
        deltas,
    }
}

fn criterion_9() -> Result<Check> {
    let mut bad = Vec::new();
    let mut expect = |name: &str, got: f64, want: f64| {
        if rel(got, want) > 1e-12 && (got - want).abs() > 1e-12 {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    expect("theta", service_success_rate(&[1.0, -1.0, 0.0]), 2.0 / 3.0);
    expect("kappa", service_arrival_rate(&[1.0, 0.5, 1.0, 1.0]), 0.75);
    expect(
        "omega",
        non_instant_decision_error(1.1, 1.0).unwrap_or(f64::NAN),
        0.1,
    );
    expect(
        "omega equal",
        non_instant_decision_error(2.0, 2.0).unwrap_or(f64::NAN),
        0.0,
    );
    let omega_undefined = non_instant_decision_error(1.0, 0.0).is_none();

    // 2 users, 10 slots, windows of 2 slots
    let ch0 = [0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
    let ch1 = [3, 3, 3, 3, 0, 0, 0, 0, 3, 3];
    let r0 = [1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0];
    let r1 = [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 4.0];
    let q1 = [1.0, 2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let mut traj = Trajectory::new(2);
    for t in 0..10 {
        traj.push(record(t, [ch0[t], ch1[t]], [r0[t], r1[t]], [1.0, q1[t]]))?;
    }
    let p = StabilityParams { switch_interval: 2 };
    // switches 2 + 2; user 0: 8 extrema × 10/9 against a flat requirement;
    // user 1: flat rate against 1 extremum × 0.1
    let st = service_stability(&traj, p)?;
    expect("S_ta switches", st.switches as f64, 4.0);
    expect("S_ta windows", st.windows as f64, 5.0);
    expect("S_ta fluctuation", st.fluctuation, 791.0 / 180.0);
    expect("S_ta", st.raw, 791.0 / 9.0);
    expect(
        "kappa of the hand trajectory",
        service_arrival_rate(&traj.thetas()),
        1.0,
    );

    let reread = Trajectory::parse_csv(&traj.to_csv(&[]), "memory")?;
    let reproduced = service_stability(&reread, p)?.raw.to_bits() == st.raw.to_bits();

    let mut still = Trajectory::new(2);
    for t in 0..10 {
        still.push(record(t, [0, 1], [2.0, 3.0], [1.0, 1.0]))?;
    }
    expect("S_ta constant", service_stability(&still, p)?.raw, 0.0);

    let norm = min_max_normalize(&[st.raw, 0.0, 10.0]);
    expect("normalised max", norm[0], 1.0);
    expect("normalised min", norm[1], 0.0);

    let pass = bad.is_empty() && omega_undefined && reproduced;
    let detail = if pass {
        format!(
            "theta, kappa, omega and S_ta = {:.4} match hand values; constant case 0",
            st.raw
        )
    } else {
        format!(
            "{}{}{}",
            bad.join("; "),
            if omega_undefined {
                ""
            } else {
                "; omega at zero lagged performance defined"
            },
            if reproduced {
                ""
            } else {
                "; reread trajectory differs"
            }
        )
    };
    Ok(Check::new(pass, detail))
}

// ---------------------------------------------------------------------

fn main() {
    let wanted: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let run = |n: usize| wanted.is_empty() || wanted.contains(&n);
    let mut failed = 0;
    let mut report =
        |n: usize, name: &str, started: Instant, res: std::result::Result<Check, String>| {
            let secs = started.elapsed().as_secs_f64();
            match res {
                Ok(c) => {
                    if !c.pass {
                        failed += 1;
                    }
                    println!(
                        "criterion {n} ({name}): {} [{secs:.0}s] {}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.detail
                    );
                }
                Err(e) => {
                    failed += 1;
                    println!("criterion {n} ({name}): FAIL [{secs:.0}s] error: {e}");
                }
            }
        };
    let simple: [(usize, &str, CriterionFn); 5] = [
        (1, "gradient fidelity", criterion_1),
        (2, "formula oracles", criterion_2),
        (3, "assignment optimality", criterion_3),
        (9, "metric oracles", criterion_9),
        (4, "predictor quality", criterion_4),
    ];
    for (n, name, f) in simple {
        if run(n) {
            let t = Instant::now();
            report(n, name, t, f().map_err(|e| e.to_string()));
        }
    }
    if run(5) {
        let t = Instant::now();
        report(
            5,
            "learning progress",
            t,
            criterion_5().map_err(|e| e.to_string()),
        );
    }
    if run(6) || run(7) {
        let t = Instant::now();
        match fast_cells() {
            Ok(c) => {
                if run(6) {
                    report(6, "lag robustness", t, Ok(criterion_6(&c)));
                }
                if run(7) {
                    report(7, "l-slot superiority", t, Ok(criterion_7(&c)));
                }
            }
            Err(e) => {
                for (n, name) in [(6, "lag robustness"), (7, "l-slot superiority")] {
                    if run(n) {
                        report(n, name, t, Err(e.to_string()));
                    }
                }
            }
        }
    }
    if run(8) {
        let t = Instant::now();
        report(
            8,
            "convergence with prediction",
            t,
            criterion_8().map_err(|e| e.to_string()),
        );
    }
    println!("{failed} criteria failed");
    if failed > 0 && std::env::var("DMCA_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
