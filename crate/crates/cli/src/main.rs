//! Command line front end: sample datasets, fit estimators, trace tilt
//! curves, integrate the training dynamics, and run Monte Carlo or full
//! experiment jobs.
//!
//! Exit codes: 0 on success, 1 for invalid input, 2 for numeric failures,
//! 3 for i/o failures.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use prefband::data::{sample_pairwise_dataset, PairwiseDataset};
use prefband::dynamics::{integrate, OdeParams};
use prefband::harness::config::ExperimentConfig;
use prefband::harness::montecarlo::{
    estimate_flip_report, tail_event_report, tail_win_report, MonteCarloReport,
};
use prefband::harness::report::{curve_csv, fmt_float, trace_csv, trajectory_csv, write_text};
use prefband::harness::experiment::run_experiment;
use prefband::loss::PairWeighting;
use prefband::model::{hard_instance, ComparisonDistribution, RewardVector};
use prefband::policy::{default_lambda_grid, kl_reward_curve, PolicyVector};
use prefband::registry::by_name;
use prefband::train::{BatchSchedule, PopulationEval, TrainConfig};
use prefband::{Error, Result};

#[derive(Parser)]
#[command(
    name = "prefband",
    version,
    about = "Reward learning from preference feedback in multi-armed bandits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a pairwise dataset from the hard instance.
    Simulate(SimulateArgs),
    /// Fit one estimator and write its training trace.
    Fit(FitArgs),
    /// Fit one estimator and trace its KL-reward tilt curve.
    Curve(CurveArgs),
    /// Integrate the two-timescale limit of smoothed training.
    Ode(OdeArgs),
    /// Monte Carlo frequency reports for the hard-instance events.
    Montecarlo(MontecarloArgs),
    /// Run the configured experiment end to end.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Arms of the hard instance.
    #[arg(long, default_value_t = 10)]
    arms: usize,
    /// Comparisons to draw.
    #[arg(long, default_value_t = 60)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Dataset file; a fresh hard-instance draw when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Arms of the hard instance (ignored with --data).
    #[arg(long, default_value_t = 10)]
    arms: usize,
    /// Comparisons to draw (ignored with --data).
    #[arg(long, default_value_t = 60)]
    samples: usize,
    /// Estimator name: mle, pessimistic, ids, or ids_v2.
    #[arg(long, default_value = "mle")]
    estimator: String,
    /// Reward step size.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Label step size for the smoothing estimators.
    #[arg(long, default_value_t = 0.001)]
    beta: f64,
    /// Regularizer for the pessimistic estimator.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    epochs: usize,
    /// Records per batch; 0 runs full-batch epochs.
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated ascending tilt strengths; a default grid when
    /// omitted.
    #[arg(long)]
    lambda_grid: Option<String>,
}

#[derive(Args)]
struct OdeArgs {
    /// Reward step size in the drift.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Label relaxation rate.
    #[arg(long, default_value_t = 1e-6)]
    beta: f64,
    /// Sample-count scale multiplying alpha in the drift.
    #[arg(long, default_value_t = 100.0)]
    samples: f64,
    /// Probability that the first arm wins a comparison.
    #[arg(long, default_value_t = 0.75)]
    mu: f64,
    /// Integration horizon.
    #[arg(long, default_value_t = 10.0)]
    t_end: f64,
    /// RK4 step; a stability-derived default when omitted.
    #[arg(long)]
    step: Option<f64>,
    /// Trajectory output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MontecarloArgs {
    /// Report to run: tail (sparse-pair events), flip (wrong argmax after a
    /// long fit), or tail-win (single-comparison upsets).
    #[arg(long, default_value = "tail")]
    kind: String,
    /// Arms of the hard instance (flip report only).
    #[arg(long, default_value_t = 3)]
    arms: usize,
    /// Comparisons per trial.
    #[arg(long, default_value_t = 501)]
    samples: usize,
    #[arg(long, default_value_t = 10000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Flat key=value config file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file to fit instead of sampling the hard instance.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    arms: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Comma-separated estimator names.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Records per batch; 0 runs full-batch epochs.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// Comma-separated ascending tilt strengths.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit(args),
        Command::Curve(args) => curve(args),
        Command::Ode(args) => ode(args),
        Command::Montecarlo(args) => montecarlo(args),
        Command::Experiment(args) => experiment(args),
    }
}

/// Prints to stdout, treating a closed pipe as success so `prefband ... |
/// head` exits cleanly.
fn stdout_text(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        other => other.map_err(Error::from),
    }
}

fn stdout_line(text: &str) -> Result<()> {
    stdout_text(text)?;
    stdout_text("\n")
}

/// Writes to the file when given, otherwise to stdout.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            write_text(path, text)?;
            stdout_line(&format!("wrote {}", path.display()))
        }
        None => stdout_text(text),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let (r_star, mu) = hard_instance(args.arms, args.samples)?;
    let data = sample_pairwise_dataset(&mu, &r_star, args.samples, args.seed)?;
    emit(args.out.as_deref(), &data.to_text())
}

/// Dataset plus, when it was sampled here, the generating rewards and
/// comparison distribution.
struct FitInput {
    data: PairwiseDataset,
    truth: Option<(RewardVector, ComparisonDistribution)>,
}

fn load_fit_input(args: &FitArgs) -> Result<FitInput> {
    match &args.data {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Ok(FitInput { data: PairwiseDataset::from_text(&text)?, truth: None })
        }
        None => {
            let (r_star, mu) = hard_instance(args.arms, args.samples)?;
            let data = sample_pairwise_dataset(&mu, &r_star, args.samples, args.seed)?;
            Ok(FitInput { data, truth: Some((r_star, mu)) })
        }
    }
}

fn train_config(args: &FitArgs) -> TrainConfig {
    TrainConfig {
        alpha: args.alpha,
        beta: args.beta,
        epochs: args.epochs,
        batch: if args.batch_size == 0 {
            BatchSchedule::Full
        } else {
            BatchSchedule::Minibatch(args.batch_size)
        },
        seed: args.seed,
        eval_every: 1,
        convergence_tol: 0.0,
        restore_best: false,
    }
}

fn fit(args: FitArgs) -> Result<()> {
    let input = load_fit_input(&args)?;
    let estimator = by_name(&args.estimator, args.epsilon)?;
    let cfg = train_config(&args);
    let eval = input.truth.as_ref().map(|(r_star, _)| PopulationEval {
        r_star,
        weighting: PairWeighting::UniformPairs,
    });
    let outcome = estimator.fit(&input.data, &cfg, eval.as_ref())?;

    let comments = vec![format!("estimator={}", args.estimator), format!("seed={}", args.seed)];
    emit(args.out.as_deref(), &trace_csv(&outcome.trace, &comments))?;

    if args.out.is_some() {
        let last = outcome.trace.final_record();
        stdout_line(&format!(
            "estimator={} final_empirical_loss={:.6} final_population_loss={:.6}",
            args.estimator, last.empirical_loss, last.population_loss,
        ))?;
        let rewards: Vec<String> =
            outcome.reward.values().iter().map(|v| format!("{v:.6}")).collect();
        stdout_line(&format!("rewards={}", rewards.join(",")))?;
    }
    Ok(())
}

fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::config(format!("bad lambda value {s:?}")))
        })
        .collect()
}

fn curve(args: CurveArgs) -> Result<()> {
    let input = load_fit_input(&args.fit)?;
    let (r_star, _) = input.truth.as_ref().ok_or_else(|| {
        Error::config("the tilt curve needs the generating rewards; omit --data")
    })?;
    let grid = match &args.lambda_grid {
        Some(text) => parse_lambda_grid(text)?,
        None => default_lambda_grid(),
    };

    let estimator = by_name(&args.fit.estimator, args.fit.epsilon)?;
    let cfg = train_config(&args.fit);
    let outcome = estimator.fit(&input.data, &cfg, None)?;
    let pi0 = PolicyVector::uniform(input.data.num_arms())?;
    let points = kl_reward_curve(&outcome.reward, r_star, &pi0, &grid)?;

    let comments = vec![format!("estimator={}", args.fit.estimator), format!("seed={}", args.fit.seed)];
    emit(args.fit.out.as_deref(), &curve_csv(&points, &comments))
}

fn ode(args: OdeArgs) -> Result<()> {
    let params =
        OdeParams { alpha: args.alpha, beta: args.beta, n: args.samples, mu: args.mu };
    params.validate()?;
    let step = args.step.unwrap_or_else(|| params.default_step());
    let trajectory = integrate(&params, args.t_end, step)?;

    let comments = vec![format!(
        "alpha={} beta={} n={} mu={} t_end={}",
        args.alpha, args.beta, args.samples, args.mu, args.t_end
    )];
    emit(args.out.as_deref(), &trajectory_csv(&trajectory, &comments))?;

    if args.out.is_some() {
        let last = trajectory.final_state();
        stdout_line(&format!("final d={:.6} y={:.6} at t={:.6}", last.d, last.y, last.t))?;
    }
    Ok(())
}

fn report_csv(report: &MonteCarloReport) -> String {
    let mut text = String::from("event,count,trials,frequency,wilson_low,wilson_high\n");
    for e in &report.events {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            e.name,
            e.count,
            report.trials,
            fmt_float(e.frequency),
            fmt_float(e.low),
            fmt_float(e.high),
        ));
    }
    text
}

fn montecarlo(args: MontecarloArgs) -> Result<()> {
    let report = match args.kind.as_str() {
        "tail" => tail_event_report(args.samples, args.trials, args.seed)?,
        "flip" => estimate_flip_report(args.arms, args.samples, args.trials, args.seed)?,
        "tail-win" => tail_win_report(args.trials, args.seed)?,
        other => {
            return Err(Error::config(format!(
                "unknown report kind {other:?}; expected tail, flip, or tail-win"
            )))
        }
    };
    emit(args.out.as_deref(), &report_csv(&report))
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }

    // Flags override the config file through the same key=value channel.
    let mut overrides: Vec<(&str, String)> = Vec::new();
    if let Some(path) = &args.data {
        overrides.push(("instance", path.display().to_string()));
    }
    if let Some(v) = args.arms {
        overrides.push(("arms", v.to_string()));
    }
    if let Some(v) = args.samples {
        overrides.push(("samples", v.to_string()));
    }
    if let Some(v) = &args.estimator {
        overrides.push(("estimators", v.clone()));
    }
    if let Some(v) = args.alpha {
        overrides.push(("alpha", v.to_string()));
    }
    if let Some(v) = args.beta {
        overrides.push(("beta", v.to_string()));
    }
    if let Some(v) = args.epsilon {
        overrides.push(("epsilon", v.to_string()));
    }
    if let Some(v) = args.epochs {
        overrides.push(("epochs", v.to_string()));
    }
    if let Some(v) = args.batch_size {
        overrides.push(("batch_size", v.to_string()));
    }
    if let Some(v) = args.eval_every {
        overrides.push(("eval_every", v.to_string()));
    }
    if let Some(v) = &args.lambda_grid {
        overrides.push(("lambda_grid", v.clone()));
    }
    if let Some(v) = args.trials {
        overrides.push(("trials", v.to_string()));
    }
    if let Some(v) = args.seed {
        overrides.push(("seed", v.to_string()));
    }
    if let Some(v) = &args.out {
        overrides.push(("out", v.display().to_string()));
    }
    for (key, value) in overrides {
        cfg.apply_kv(key, &value)?;
    }

    let summary = run_experiment(&cfg)?;
    stdout_line(&format!("wrote {}", summary.out_dir.display()))?;
    for trial in &summary.trials {
        for o in &trial.outcomes {
            let min = o
                .min_population_loss
                .map_or("n/a".to_string(), |(epoch, v)| format!("{v:.6}@{epoch}"));
            stdout_line(&format!(
                "trial={} estimator={} final_empirical_loss={:.6} final_population_loss={:.6} min_population_loss={}",
                trial.trial, o.estimator, o.final_empirical_loss, o.final_population_loss, min,
            ))?;
        }
    }
    Ok(())
}
