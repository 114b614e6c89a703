//! End-to-end experiment driver: sample or load a dataset, run the selected
//! estimators, and write traces, tilt curves, and a rerunnable manifest.
//!
//! Output layout under the configured directory: `manifest.txt` plus, per
//! trial, `dataset.txt`, `trace_{estimator}.csv`, `curve_{estimator}.csv`
//! (hard instances only, where the generating rewards are known), and
//! `penalties_{estimator}.csv` for estimators that subtract penalties.
//! Single-trial runs write into the directory itself; multi-trial runs use
//! `trial_{t}` subdirectories and add a cross-trial `summary.csv`.

use std::path::{Path, PathBuf};

use crate::data::{sample_pairwise_dataset, PairwiseDataset};
use crate::error::Result;
use crate::harness::config::{ExperimentConfig, InstanceSpec};
use crate::harness::montecarlo::{dominance_margin, misleading_event_scan, MisleadingEvent};
use crate::harness::report::{curve_csv, fmt_float, manifest_text, trace_csv, write_text};
use crate::model::{hard_instance, ComparisonDistribution, RewardVector};
use crate::policy::{default_lambda_grid, kl_reward_curve, KlRewardPoint, PolicyVector};
use crate::registry::by_name;
use crate::rng::{sub_seed, GENERATOR_ID};
use crate::train::{fit_ids, BatchSchedule, PopulationEval, TrainConfig};

/// One estimator's headline numbers from one trial.
#[derive(Debug, Clone)]
pub struct EstimatorOutcome {
    pub estimator: String,
    /// Reference-normalized reward estimate.
    pub rewards: Vec<f64>,
    pub final_empirical_loss: f64,
    /// NaN when the instance has no known generating rewards.
    pub final_population_loss: f64,
    /// Smallest population loss seen along the trace, with its epoch; `None`
    /// without a population evaluator.
    pub min_population_loss: Option<(usize, f64)>,
}

/// One trial's outcomes; `dir` holds its output files.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub trial: usize,
    pub dir: PathBuf,
    pub outcomes: Vec<EstimatorOutcome>,
}

#[derive(Debug)]
pub struct ExperimentSummary {
    pub out_dir: PathBuf,
    pub trials: Vec<TrialSummary>,
}

enum Instance {
    Hard {
        r_star: RewardVector,
        mu: ComparisonDistribution,
        samples: usize,
    },
    Fixed(PairwiseDataset),
}

/// Runs the configured experiment and writes all outputs under
/// `cfg.out_dir`. Every trial derives its dataset and shuffling from
/// `sub_seed(cfg.seed, trial)`, so a run is reproducible from its manifest.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSummary> {
    cfg.validate()?;

    let instance = match &cfg.instance {
        InstanceSpec::Hard { num_arms, samples } => {
            let (r_star, mu) = hard_instance(*num_arms, *samples)?;
            Instance::Hard { r_star, mu, samples: *samples }
        }
        InstanceSpec::CustomFile(path) => {
            let text = std::fs::read_to_string(path)?;
            Instance::Fixed(PairwiseDataset::from_text(&text)?)
        }
    };

    // Known generating rewards make population evaluation and tilt curves
    // possible; a custom dataset has neither.
    let eval_holder;
    let eval = match &instance {
        Instance::Hard { r_star, mu, .. } => {
            eval_holder = PopulationEval { r_star, weighting: cfg.population_weighting(mu) };
            Some(&eval_holder)
        }
        Instance::Fixed(_) => None,
    };

    let mut trials = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let trial_seed = sub_seed(cfg.seed, trial as u64);
        let dir = if cfg.trials == 1 {
            cfg.out_dir.clone()
        } else {
            cfg.out_dir.join(format!("trial_{trial}"))
        };

        let data = match &instance {
            Instance::Hard { r_star, mu, samples } => {
                sample_pairwise_dataset(mu, r_star, *samples, trial_seed)?
            }
            Instance::Fixed(data) => data.clone(),
        };
        write_text(&dir.join("dataset.txt"), &data.to_text())?;

        let mut outcomes = Vec::with_capacity(cfg.estimators.len());
        for name in &cfg.estimators {
            let estimator = by_name(name, cfg.epsilon)?;
            let mut train_cfg = cfg.train_config_for(name);
            train_cfg.seed = trial_seed;
            let fit = estimator.fit(&data, &train_cfg, eval)?;

            let comments = vec![
                format!("estimator={name}"),
                format!("trial={trial}"),
                format!("seed={trial_seed}"),
                format!("rng={GENERATOR_ID}"),
            ];
            write_text(
                &dir.join(format!("trace_{name}.csv")),
                &trace_csv(&fit.trace, &comments),
            )?;

            if let Instance::Hard { r_star, .. } = &instance {
                let pi0 = PolicyVector::uniform(data.num_arms())?;
                let points = kl_reward_curve(&fit.reward, r_star, &pi0, &cfg.lambda_grid)?;
                write_text(
                    &dir.join(format!("curve_{name}.csv")),
                    &curve_csv(&points, &comments),
                )?;
            }

            if let Some(penalties) = &fit.penalties {
                let mut text = String::from("arm,penalty\n");
                for (arm, p) in penalties.iter().enumerate() {
                    text.push_str(&format!("{arm},{}\n", fmt_float(*p)));
                }
                write_text(&dir.join(format!("penalties_{name}.csv")), &text)?;
            }

            let last = fit.trace.final_record();
            outcomes.push(EstimatorOutcome {
                estimator: name.clone(),
                rewards: fit.reward.values().to_vec(),
                final_empirical_loss: last.empirical_loss,
                final_population_loss: last.population_loss,
                min_population_loss: fit.trace.min_population_loss(),
            });
        }
        trials.push(TrialSummary { trial, dir, outcomes });
    }

    if cfg.trials > 1 {
        let mut text = String::from(
            "trial,estimator,final_empirical_loss,final_population_loss,min_population_loss\n",
        );
        for t in &trials {
            for o in &t.outcomes {
                let min = o.min_population_loss.map_or(f64::NAN, |(_, v)| v);
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    t.trial,
                    o.estimator,
                    fmt_float(o.final_empirical_loss),
                    fmt_float(o.final_population_loss),
                    fmt_float(min),
                ));
            }
        }
        write_text(&cfg.out_dir.join("summary.csv"), &text)?;
    }

    // Extra provenance lines go in as comments so the manifest stays a valid
    // config file.
    let mut manifest = format!(
        "# experiment manifest\n# package_version={}\n# rng={}\n",
        env!("CARGO_PKG_VERSION"),
        GENERATOR_ID,
    );
    manifest.push_str(&manifest_text(&cfg.manifest_entries()));
    write_text(&cfg.out_dir.join("manifest.txt"), &manifest)?;

    Ok(ExperimentSummary { out_dir: cfg.out_dir.clone(), trials })
}

/// The misleading-draw comparison: both estimates on one crossing dataset.
#[derive(Debug)]
pub struct MisleadingCurveReport {
    pub event: MisleadingEvent,
    /// Tilt curve of the maximum likelihood snapshot at the crossing epoch.
    pub mle_curve: Vec<KlRewardPoint>,
    /// Tilt curve of the smoothed fit on the same dataset.
    pub ids_curve: Vec<KlRewardPoint>,
}

/// Scans the hard instance for a draw whose long-budget maximum likelihood
/// descent ranks a wrong arm on top by the dominance margin of the default
/// grid's strongest tilt, then contrasts that snapshot's tilt curve against
/// a smoothed fit on the same draw. Writes `curve_mle.csv` and
/// `curve_ids.csv` when `out_dir` is given. Returns `None` when no draw
/// among `max_trials` crosses.
pub fn misleading_curve_experiment(
    num_arms: usize,
    samples: usize,
    max_trials: u64,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<Option<MisleadingCurveReport>> {
    let grid = default_lambda_grid();
    let lambda_max = *grid.last().expect("default grid is nonempty");
    let margin = dominance_margin(lambda_max);
    let event = match misleading_event_scan(num_arms, samples, margin, max_trials, seed)? {
        Some(event) => event,
        None => return Ok(None),
    };

    let (r_star, mu) = hard_instance(num_arms, samples)?;
    let data = sample_pairwise_dataset(&mu, &r_star, samples, event.dataset_seed)?;
    let pi0 = PolicyVector::uniform(num_arms)?;

    let snapshot = RewardVector::new(event.rewards_at_crossing.clone())?.normalized();
    let mle_curve = kl_reward_curve(&snapshot, &r_star, &pi0, &grid)?;

    let mut cfg = TrainConfig::new(0.01, 0.001, 2000, event.dataset_seed);
    cfg.batch = BatchSchedule::Minibatch(1);
    cfg.eval_every = 100;
    cfg.convergence_tol = 0.0;
    let (smoothed, _, _) = fit_ids(&data, &cfg, None)?;
    let ids_curve = kl_reward_curve(&smoothed, &r_star, &pi0, &grid)?;

    if let Some(dir) = out_dir {
        let comments = vec![
            format!("instance=hard arms={num_arms} samples={samples}"),
            format!("dataset_seed={}", event.dataset_seed),
            format!("crossing_epoch={}", event.crossing_epoch),
        ];
        write_text(&dir.join("curve_mle.csv"), &curve_csv(&mle_curve, &comments))?;
        write_text(&dir.join("curve_ids.csv"), &curve_csv(&ids_curve, &comments))?;
    }

    Ok(Some(MisleadingCurveReport { event, mle_curve, ids_curve }))
}
