//! Gradient-descent reward fitting with optional label smoothing.
//!
//! All fits share one epoch loop so variants differ only in how per-record
//! targets evolve:
//!
//! * maximum likelihood: labels stay at the observed outcomes;
//! * iterative data smoothing: labels relax toward the model's own
//!   predictions after every epoch, `y <- (1-beta) y + beta p`, which stops
//!   sparsely compared pairs from dragging the estimate to infinity;
//! * the confidence variant keeps hard labels but weights each record by
//!   `max(2c - 1, 0)` where the confidence `c` relaxes the same way, so
//!   records the model has learned to doubt drop out of the gradient.
//!
//! Sharing the loop is deliberate: smoothing with `beta = 0` reproduces the
//! maximum-likelihood trajectory bit for bit, which the test suite checks.

use rand::seq::SliceRandom;

use crate::data::PairwiseDataset;
use crate::error::{Error, Result};
use crate::loss::{empirical_ce_gradient, population_ce_loss, soft_bce, PairWeighting};
use crate::model::{sigmoid, RewardVector};
use crate::rng::sub_rng;

// sub-stream indices off the run seed, shared with the multiwise trainer so
// matched seeds consume randomness identically
pub(crate) const SHUFFLE_STREAM: u64 = 0;
pub(crate) const SPLIT_STREAM: u64 = 1;

/// How records are grouped into gradient steps within an epoch.
///
/// Batch gradients are scaled by the full dataset size, not the batch size,
/// so an epoch of mini-batch steps applies the same total step as one
/// full-batch step to first order. Each pair therefore moves at a rate
/// proportional to its share of the data regardless of batching, which is
/// the regime where the smoothing timescale `beta` has its intended meaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSchedule {
    /// One deterministic gradient step per epoch over all records.
    Full,
    /// Shuffled mini-batches of the given size (last batch may be smaller).
    Minibatch(usize),
}

/// Hyperparameters for a single fit.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Reward step size.
    pub alpha: f64,
    /// Label (or confidence) step size; ignored by plain maximum likelihood.
    pub beta: f64,
    /// Epoch cap.
    pub epochs: usize,
    pub batch: BatchSchedule,
    /// Seed for batch shuffling and the validation split.
    pub seed: u64,
    /// Trace cadence in epochs; the initial state and the final epoch are
    /// always recorded.
    pub eval_every: usize,
    /// Stop once the max-norm reward change over an epoch falls below this;
    /// zero disables early stopping.
    pub convergence_tol: f64,
    /// Hold out a fifth of the records, track their hard-label loss, and
    /// return the epoch snapshot that minimized it.
    pub restore_best: bool,
}

impl TrainConfig {
    pub fn new(alpha: f64, beta: f64, epochs: usize, seed: u64) -> Self {
        TrainConfig {
            alpha,
            beta,
            epochs,
            batch: BatchSchedule::Full,
            seed,
            eval_every: 10,
            convergence_tol: 1e-6,
            restore_best: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::config("beta must lie in [0, 1]"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be positive"));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence tolerance must be nonnegative"));
        }
        if let BatchSchedule::Minibatch(b) = self.batch {
            if b == 0 {
                return Err(Error::config("batch size must be positive"));
            }
        }
        Ok(())
    }
}

/// Ground truth against which the trace's population loss is evaluated.
#[derive(Debug, Clone, Copy)]
pub struct PopulationEval<'a> {
    pub r_star: &'a RewardVector,
    pub weighting: PairWeighting<'a>,
}

/// One trace row. `population_loss` is NaN when the fit ran without a
/// [`PopulationEval`]. Reward snapshots are raw (not reference-normalized).
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub epoch: usize,
    pub empirical_loss: f64,
    pub population_loss: f64,
    pub rewards: Vec<f64>,
}

/// Training history at `eval_every` resolution.
#[derive(Debug, Clone)]
pub struct TrainTrace {
    pub num_arms: usize,
    pub records: Vec<TraceRecord>,
    /// Epoch at which the max-norm stopping rule fired, if it did.
    pub converged_at: Option<usize>,
    /// Last epoch actually executed.
    pub final_epoch: usize,
}

impl TrainTrace {
    /// Minimum population loss over the trace, with its epoch.
    pub fn min_population_loss(&self) -> Option<(usize, f64)> {
        self.records
            .iter()
            .filter(|r| r.population_loss.is_finite())
            .map(|r| (r.epoch, r.population_loss))
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite losses"))
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace always has the initial record")
    }
}

/// Per-record label state after a smoothing fit.
#[derive(Debug, Clone)]
pub struct SoftLabelState {
    /// Current labels; hard observations for the confidence variant.
    pub labels: Vec<f64>,
    /// Confidence weights, present only for the confidence variant.
    pub confidences: Option<Vec<f64>>,
    /// Number of epochs applied.
    pub epoch: usize,
}

enum LabelMode {
    Frozen,
    Smooth(f64),
    Confidence(f64),
}

struct TrainOutput {
    rewards: Vec<f64>,
    trace: TrainTrace,
    labels: Vec<f64>,
    confidences: Option<Vec<f64>>,
    epochs_run: usize,
}

/// Maximum-likelihood fit; returns the reference-normalized estimate and the
/// training trace.
pub fn fit_mle(
    data: &PairwiseDataset,
    cfg: &TrainConfig,
    eval: Option<&PopulationEval>,
) -> Result<(RewardVector, TrainTrace)> {
    let out = run_training(data, cfg, eval, LabelMode::Frozen)?;
    let reward = RewardVector::new(out.rewards)?.normalized();
    Ok((reward, out.trace))
}

/// Iterative data smoothing fit (label relaxation after each epoch).
pub fn fit_ids(
    data: &PairwiseDataset,
    cfg: &TrainConfig,
    eval: Option<&PopulationEval>,
) -> Result<(RewardVector, TrainTrace, SoftLabelState)> {
    let out = run_training(data, cfg, eval, LabelMode::Smooth(cfg.beta))?;
    let reward = RewardVector::new(out.rewards)?.normalized();
    let state = SoftLabelState { labels: out.labels, confidences: None, epoch: out.epochs_run };
    Ok((reward, out.trace, state))
}

/// Confidence-weighted smoothing fit: hard labels, per-record weights
/// `max(2c - 1, 0)`.
pub fn fit_ids_v2(
    data: &PairwiseDataset,
    cfg: &TrainConfig,
    eval: Option<&PopulationEval>,
) -> Result<(RewardVector, TrainTrace, SoftLabelState)> {
    let out = run_training(data, cfg, eval, LabelMode::Confidence(cfg.beta))?;
    let reward = RewardVector::new(out.rewards)?.normalized();
    let state = SoftLabelState {
        labels: out.labels,
        confidences: out.confidences,
        epoch: out.epochs_run,
    };
    Ok((reward, out.trace, state))
}

/// Exactly one full-batch gradient step from the all-zero reward vector.
///
/// The result is `alpha/(2n) * (wins(a) - losses(a))` per arm, so pairwise
/// differences are proportional to net-win differences and the argmax
/// matches the most-net-wins arm.
pub fn one_step_gd(data: &PairwiseDataset, alpha: f64) -> Result<RewardVector> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config("alpha must be positive"));
    }
    let zeros = RewardVector::new(vec![0.0; data.num_arms()])?;
    let grad = empirical_ce_gradient(data, &data.labels_f64(), &zeros)?;
    RewardVector::new(grad.iter().map(|g| -alpha * g).collect())
}

fn run_training(
    data: &PairwiseDataset,
    cfg: &TrainConfig,
    eval: Option<&PopulationEval>,
    mode: LabelMode,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let n = data.len();
    let k = data.num_arms();
    if let Some(e) = eval {
        if e.r_star.num_arms() != k {
            return Err(Error::config("evaluation reward dimension mismatch"));
        }
    }
    if let BatchSchedule::Minibatch(b) = cfg.batch {
        if b > n {
            return Err(Error::config(format!("batch size {b} exceeds {n} records")));
        }
    }

    let records = data.records();
    let hard: Vec<f64> = data.labels_f64();
    let mut labels = hard.clone();
    let mut confidences = match mode {
        LabelMode::Confidence(_) => Some(vec![1.0; n]),
        _ => None,
    };
    let mut rewards = vec![0.0; k];
    let mut shuffle_rng = sub_rng(cfg.seed, SHUFFLE_STREAM);

    // validation split for best-checkpoint restoration
    let (train_idx, val_idx): (Vec<usize>, Vec<usize>) = if cfg.restore_best {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut sub_rng(cfg.seed, SPLIT_STREAM));
        let val_len = (n / 5).max(1);
        if val_len >= n {
            return Err(Error::config("too few records for a validation split"));
        }
        let val = idx.split_off(n - val_len);
        (idx, val)
    } else {
        ((0..n).collect(), Vec::new())
    };

    let mut trace = TrainTrace { num_arms: k, records: Vec::new(), converged_at: None, final_epoch: 0 };
    let record_eval = |trace: &mut TrainTrace,
                       epoch: usize,
                       rewards: &[f64],
                       labels: &[f64],
                       confidences: &Option<Vec<f64>>|
     -> Result<()> {
        let r = RewardVector::new(rewards.to_vec())?;
        let empirical = empirical_objective(data, labels, confidences, &r);
        let population = match eval {
            Some(e) => population_ce_loss(e.r_star, &r, e.weighting)?,
            None => f64::NAN,
        };
        trace.records.push(TraceRecord {
            epoch,
            empirical_loss: empirical,
            population_loss: population,
            rewards: rewards.to_vec(),
        });
        Ok(())
    };

    record_eval(&mut trace, 0, &rewards, &labels, &confidences)?;

    let mut best: Option<(f64, Vec<f64>)> = None;
    if cfg.restore_best {
        let r0 = RewardVector::new(rewards.clone())?;
        best = Some((subset_hard_loss(data, &hard, &val_idx, &r0), rewards.clone()));
    }

    let mut grad = vec![0.0; k];
    let mut order = train_idx.clone();
    let mut epochs_run = 0;
    let mut last_recorded = 0;

    for epoch in 1..=cfg.epochs {
        let start = rewards.clone();

        match cfg.batch {
            BatchSchedule::Full => {
                apply_batch(records, &labels, &confidences, &hard, &order, &mut rewards, &mut grad, cfg.alpha, n);
            }
            BatchSchedule::Minibatch(b) => {
                order.shuffle(&mut shuffle_rng);
                let mut pos = 0;
                while pos < order.len() {
                    let end = (pos + b).min(order.len());
                    apply_batch(
                        records,
                        &labels,
                        &confidences,
                        &hard,
                        &order[pos..end],
                        &mut rewards,
                        &mut grad,
                        cfg.alpha,
                        n,
                    );
                    pos = end;
                }
            }
        }

        // label relaxation uses the post-update model
        match mode {
            LabelMode::Frozen => {}
            LabelMode::Smooth(beta) => {
                for (i, rec) in records.iter().enumerate() {
                    let p = sigmoid(rewards[rec.a] - rewards[rec.a_prime]);
                    labels[i] = (1.0 - beta) * labels[i] + beta * p;
                }
            }
            LabelMode::Confidence(beta) => {
                let conf = confidences.as_mut().expect("confidence mode allocates weights");
                for (i, rec) in records.iter().enumerate() {
                    let p = sigmoid(rewards[rec.a] - rewards[rec.a_prime]);
                    conf[i] = (1.0 - beta) * conf[i] + beta * p;
                }
            }
        }

        epochs_run = epoch;

        if cfg.restore_best {
            let r = RewardVector::new(rewards.clone())?;
            let val_loss = subset_hard_loss(data, &hard, &val_idx, &r);
            if val_loss < best.as_ref().expect("seeded above").0 {
                best = Some((val_loss, rewards.clone()));
            }
        }

        let converged = cfg.convergence_tol > 0.0
            && rewards
                .iter()
                .zip(&start)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
                < cfg.convergence_tol;

        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs || converged {
            record_eval(&mut trace, epoch, &rewards, &labels, &confidences)?;
            last_recorded = epoch;
        }
        if converged {
            trace.converged_at = Some(epoch);
            break;
        }
    }

    if last_recorded != epochs_run {
        record_eval(&mut trace, epochs_run, &rewards, &labels, &confidences)?;
    }
    trace.final_epoch = epochs_run;

    if let Some((_, snapshot)) = best {
        rewards = snapshot;
    }

    Ok(TrainOutput { rewards, trace, labels, confidences, epochs_run })
}

/// Gradient contribution of `idx` records, scaled by the full dataset size.
#[allow(clippy::too_many_arguments)]
fn apply_batch(
    records: &[crate::data::PairRecord],
    labels: &[f64],
    confidences: &Option<Vec<f64>>,
    hard: &[f64],
    idx: &[usize],
    rewards: &mut [f64],
    grad: &mut [f64],
    alpha: f64,
    n: usize,
) {
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let n = n as f64;
    match confidences {
        None => {
            for &i in idx {
                let rec = &records[i];
                let p = sigmoid(rewards[rec.a] - rewards[rec.a_prime]);
                let g = (p - labels[i]) / n;
                grad[rec.a] += g;
                grad[rec.a_prime] -= g;
            }
        }
        Some(conf) => {
            for &i in idx {
                let rec = &records[i];
                let w = (2.0 * conf[i] - 1.0).max(0.0);
                if w == 0.0 {
                    continue;
                }
                let p = sigmoid(rewards[rec.a] - rewards[rec.a_prime]);
                let g = w * (p - hard[i]) / n;
                grad[rec.a] += g;
                grad[rec.a_prime] -= g;
            }
        }
    }
    for (r, g) in rewards.iter_mut().zip(grad.iter()) {
        *r -= alpha * g;
    }
}

/// Training objective value for the trace: plain mean cross entropy, or the
/// confidence-weighted one when weights are active.
fn empirical_objective(
    data: &PairwiseDataset,
    labels: &[f64],
    confidences: &Option<Vec<f64>>,
    r: &RewardVector,
) -> f64 {
    let mut acc = 0.0;
    match confidences {
        None => {
            for (rec, &y) in data.records().iter().zip(labels) {
                let p = sigmoid(r.values()[rec.a] - r.values()[rec.a_prime]);
                acc += soft_bce(p, y);
            }
        }
        Some(conf) => {
            for ((rec, &y), &c) in data.records().iter().zip(labels).zip(conf) {
                let w = (2.0 * c - 1.0).max(0.0);
                let p = sigmoid(r.values()[rec.a] - r.values()[rec.a_prime]);
                acc += w * soft_bce(p, y);
            }
        }
    }
    acc / data.len() as f64
}

fn subset_hard_loss(data: &PairwiseDataset, hard: &[f64], idx: &[usize], r: &RewardVector) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    for &i in idx {
        let rec = &data.records()[i];
        let p = sigmoid(r.values()[rec.a] - r.values()[rec.a_prime]);
        acc += soft_bce(p, hard[i]);
    }
    acc / idx.len() as f64
}
