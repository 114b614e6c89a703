//! Ranked-list generalizations of the pairwise losses and their smoothed
//! trainers.
//!
//! A ranking over M actions can carry soft labels in three shapes:
//!
//! * pairwise split: one soft binary label per rank pair `(j, k)`, trained
//!   with the same winner-versus-loser cross entropy as the pairwise path;
//! * ranking: one soft weight per rank, applied to the observed order's
//!   suffix log-softmax terms;
//! * full permutation: one soft weight per (permutation, rank) cell, which
//!   sums suffix terms over every possible order of each record.
//!
//! All variants share the epoch loop of the pairwise trainer. At arity 2 the
//! pairwise split reproduces the pairwise smoothing fit bit for bit under
//! matched seeds, which the test suite checks.

use rand::seq::SliceRandom;

use crate::data::{MultiwiseDataset, MultiwiseRecord};
use crate::error::{Error, Result};
use crate::loss::soft_bce;
use crate::model::{btl_prob, log_suffix_softmax, sigmoid, RewardVector};
use crate::rng::sub_rng;
use crate::train::{
    BatchSchedule, TraceRecord, TrainConfig, TrainTrace, SHUFFLE_STREAM, SPLIT_STREAM,
};

/// Largest arity for which the full-permutation objective is materialized.
/// The label table grows as M! times M, so enumeration stops being a desk
/// exercise quickly.
pub const FULL_PERMUTATION_ARITY_CAP: usize = 4;

/// How soft labels attach to a ranked record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiwiseVariant {
    /// One label per rank pair `(j, k)` with `j < k`; the default, since it
    /// generalizes the pairwise update cleanly.
    PairwiseSplit,
    /// One weight per rank on the observed ranking's suffix terms.
    Ranking,
    /// One weight per (permutation, rank) cell; capped at
    /// [`FULL_PERMUTATION_ARITY_CAP`].
    FullPermutation,
}

impl MultiwiseVariant {
    pub const ALL: [MultiwiseVariant; 3] = [
        MultiwiseVariant::PairwiseSplit,
        MultiwiseVariant::Ranking,
        MultiwiseVariant::FullPermutation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MultiwiseVariant::PairwiseSplit => "pairwise_split",
            MultiwiseVariant::Ranking => "ranking",
            MultiwiseVariant::FullPermutation => "full_permutation",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "pairwise_split" => Ok(MultiwiseVariant::PairwiseSplit),
            "ranking" => Ok(MultiwiseVariant::Ranking),
            "full_permutation" => Ok(MultiwiseVariant::FullPermutation),
            _ => Err(Error::config(format!("unknown multiwise variant {name:?}"))),
        }
    }
}

/// Per-record soft labels for one of the ranked-loss variants.
///
/// Slot layouts, per record of arity `m`:
///
/// * pairwise split: `m (m - 1) / 2` slots, rank pairs `(j, k)` with `j < k`
///   in lexicographic order, initialized to 1;
/// * ranking: `m` slots, one per rank, initialized to 1;
/// * full permutation: `m! * m` slots, permutation-major over the
///   lexicographic order of permutations, initialized as the indicator of
///   the observed ranking (1 in every rank slot of that permutation).
///
/// Entries always lie in `[0, 1]`: they start there and every update is a
/// convex combination with a probability.
#[derive(Debug, Clone)]
pub struct MultiwiseSoftLabels {
    variant: MultiwiseVariant,
    arity: usize,
    values: Vec<Vec<f64>>,
}

impl MultiwiseSoftLabels {
    /// Labels at their starting state for `data`.
    pub fn initial(data: &MultiwiseDataset, variant: MultiwiseVariant) -> Result<Self> {
        let m = data.arity();
        let values = match variant {
            MultiwiseVariant::PairwiseSplit => {
                vec![vec![1.0; m * (m - 1) / 2]; data.len()]
            }
            MultiwiseVariant::Ranking => vec![vec![1.0; m]; data.len()],
            MultiwiseVariant::FullPermutation => {
                if m > FULL_PERMUTATION_ARITY_CAP {
                    return Err(Error::config(format!(
                        "arity {m} exceeds the full-permutation cap {FULL_PERMUTATION_ARITY_CAP}"
                    )));
                }
                let perms = permutations(m);
                data.records()
                    .iter()
                    .map(|rec| {
                        let mut v = vec![0.0; perms.len() * m];
                        let p = perms
                            .iter()
                            .position(|s| s[..] == rec.ranking[..])
                            .expect("observed ranking is a valid permutation");
                        for j in 0..m {
                            v[p * m + j] = 1.0;
                        }
                        v
                    })
                    .collect()
            }
        };
        Ok(MultiwiseSoftLabels { variant, arity: m, values })
    }

    pub fn variant(&self) -> MultiwiseVariant {
        self.variant
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// One slot vector per record.
    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }
}

/// Pairwise-split objective: mean over records of the summed soft binary
/// cross entropies over all rank pairs.
pub fn mle2_loss(
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    r: &RewardVector,
) -> Result<f64> {
    check_compat(data, labels, r, MultiwiseVariant::PairwiseSplit)?;
    let ctx = VariantCtx::new(MultiwiseVariant::PairwiseSplit, data.arity());
    Ok(total_loss(&ctx, data, labels, r))
}

/// Ranking objective: mean over records of the rank-weighted negative suffix
/// log-softmax terms of the observed order. With all-ones labels this is the
/// negative log Plackett-Luce likelihood.
pub fn mle_m_loss(
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    r: &RewardVector,
) -> Result<f64> {
    check_compat(data, labels, r, MultiwiseVariant::Ranking)?;
    let ctx = VariantCtx::new(MultiwiseVariant::Ranking, data.arity());
    Ok(total_loss(&ctx, data, labels, r))
}

/// Full-permutation objective: like the ranking loss, but summed over every
/// permutation of each record with its own label weight.
pub fn mle_m_full_permutation_loss(
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    r: &RewardVector,
) -> Result<f64> {
    check_compat(data, labels, r, MultiwiseVariant::FullPermutation)?;
    let ctx = VariantCtx::new(MultiwiseVariant::FullPermutation, data.arity());
    Ok(total_loss(&ctx, data, labels, r))
}

/// Relaxes every label slot toward the model's predicted probability:
/// `y <- (1 - beta) y + beta p`.
///
/// Targets per variant: pairwise split uses the winner-versus-loser
/// probability of each rank pair, ranking uses the suffix softmax of the
/// observed order, full permutation the suffix softmax of every order.
pub fn multiwise_label_update(
    labels: &mut MultiwiseSoftLabels,
    data: &MultiwiseDataset,
    r: &RewardVector,
    variant: MultiwiseVariant,
    beta: f64,
) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::config("beta must lie in [0, 1]"));
    }
    check_compat(data, labels, r, variant)?;
    let ctx = VariantCtx::new(variant, data.arity());
    let mut probs = Vec::new();
    update_labels(&ctx, data.records(), &mut labels.values, r.values(), beta, &mut probs);
    Ok(())
}

/// Smoothed fit of the chosen ranked-loss variant: each epoch takes gradient
/// steps on the variant loss, then relaxes the labels toward the post-update
/// model. Trace population losses are NaN, ground-truth comparison is only
/// defined for the pairwise path.
pub fn fit_ids_multiwise(
    data: &MultiwiseDataset,
    cfg: &TrainConfig,
    variant: MultiwiseVariant,
) -> Result<(RewardVector, TrainTrace)> {
    cfg.validate()?;
    let n = data.len();
    let k = data.num_arms();
    if let BatchSchedule::Minibatch(b) = cfg.batch {
        if b > n {
            return Err(Error::config(format!("batch size {b} exceeds {n} records")));
        }
    }

    let mut labels = MultiwiseSoftLabels::initial(data, variant)?;
    // starting labels double as the hard targets for the validation split
    let initial = labels.clone();
    let ctx = VariantCtx::new(variant, data.arity());
    let records = data.records();
    let mut rewards = vec![0.0; k];
    let mut shuffle_rng = sub_rng(cfg.seed, SHUFFLE_STREAM);

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
    record_eval(&ctx, data, &labels, &rewards, 0, &mut trace)?;

    let mut best: Option<(f64, Vec<f64>)> = None;
    if cfg.restore_best {
        let r0 = RewardVector::new(rewards.clone())?;
        best = Some((subset_loss(&ctx, data, &initial, &val_idx, &r0), rewards.clone()));
    }

    let mut grad = vec![0.0; k];
    let mut probs = Vec::new();
    let mut order = train_idx.clone();
    let mut epochs_run = 0;
    let mut last_recorded = 0;

    for epoch in 1..=cfg.epochs {
        let start = rewards.clone();

        match cfg.batch {
            BatchSchedule::Full => {
                apply_batch(&ctx, records, &labels, &order, &mut rewards, &mut grad, &mut probs, cfg.alpha, n);
            }
            BatchSchedule::Minibatch(b) => {
                order.shuffle(&mut shuffle_rng);
                let mut pos = 0;
                while pos < order.len() {
                    let end = (pos + b).min(order.len());
                    apply_batch(
                        &ctx,
                        records,
                        &labels,
                        &order[pos..end],
                        &mut rewards,
                        &mut grad,
                        &mut probs,
                        cfg.alpha,
                        n,
                    );
                    pos = end;
                }
            }
        }

        // label relaxation uses the post-update model
        update_labels(&ctx, records, &mut labels.values, &rewards, cfg.beta, &mut probs);

        epochs_run = epoch;

        if cfg.restore_best {
            let r = RewardVector::new(rewards.clone())?;
            let val_loss = subset_loss(&ctx, data, &initial, &val_idx, &r);
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
            record_eval(&ctx, data, &labels, &rewards, epoch, &mut trace)?;
            last_recorded = epoch;
        }
        if converged {
            trace.converged_at = Some(epoch);
            break;
        }
    }

    if last_recorded != epochs_run {
        record_eval(&ctx, data, &labels, &rewards, epochs_run, &mut trace)?;
    }
    trace.final_epoch = epochs_run;

    if let Some((_, snapshot)) = best {
        rewards = snapshot;
    }

    let reward = RewardVector::new(rewards)?.normalized();
    Ok((reward, trace))
}

struct VariantCtx {
    variant: MultiwiseVariant,
    /// Lexicographic permutations of the rank positions; empty unless the
    /// variant enumerates them.
    perms: Vec<Vec<usize>>,
}

impl VariantCtx {
    fn new(variant: MultiwiseVariant, arity: usize) -> Self {
        let perms = match variant {
            MultiwiseVariant::FullPermutation => permutations(arity),
            _ => Vec::new(),
        };
        VariantCtx { variant, perms }
    }
}

fn check_compat(
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    r: &RewardVector,
    expected: MultiwiseVariant,
) -> Result<()> {
    if labels.variant != expected {
        return Err(Error::config(format!(
            "labels carry variant {}, expected {}",
            labels.variant.as_str(),
            expected.as_str()
        )));
    }
    if labels.arity != data.arity() {
        return Err(Error::config("label arity does not match the dataset"));
    }
    if labels.values.len() != data.len() {
        return Err(Error::config("label record count does not match the dataset"));
    }
    if r.num_arms() != data.num_arms() {
        return Err(Error::config("reward dimension does not match the dataset"));
    }
    Ok(())
}

fn total_loss(
    ctx: &VariantCtx,
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    r: &RewardVector,
) -> f64 {
    let mut acc = 0.0;
    for (rec, slots) in data.records().iter().zip(&labels.values) {
        acc += record_term(ctx, rec, slots, r);
    }
    acc / data.len() as f64
}

fn subset_loss(
    ctx: &VariantCtx,
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    idx: &[usize],
    r: &RewardVector,
) -> f64 {
    if idx.is_empty() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    for &i in idx {
        acc += record_term(ctx, &data.records()[i], &labels.values[i], r);
    }
    acc / idx.len() as f64
}

/// One record's contribution to the variant objective, before the 1/n mean.
/// Zero-weight slots are skipped: they contribute nothing and would
/// otherwise turn an underflowed softmax into `0 * inf`.
fn record_term(ctx: &VariantCtx, rec: &MultiwiseRecord, slots: &[f64], r: &RewardVector) -> f64 {
    let m = rec.actions.len();
    match ctx.variant {
        MultiwiseVariant::PairwiseSplit => {
            let mut acc = 0.0;
            let mut s = 0;
            for j in 0..m {
                for k in j + 1..m {
                    let a = rec.actions[rec.ranking[j]];
                    let b = rec.actions[rec.ranking[k]];
                    acc += soft_bce(btl_prob(r, a, b), slots[s]);
                    s += 1;
                }
            }
            acc
        }
        MultiwiseVariant::Ranking => {
            let mut acc = 0.0;
            for (j, &y) in slots.iter().enumerate() {
                if y == 0.0 {
                    continue;
                }
                acc += y * (-log_suffix_softmax(r, &rec.actions, &rec.ranking, j));
            }
            acc
        }
        MultiwiseVariant::FullPermutation => {
            let mut acc = 0.0;
            for (p, sigma) in ctx.perms.iter().enumerate() {
                for j in 0..m {
                    let y = slots[p * m + j];
                    if y == 0.0 {
                        continue;
                    }
                    acc += y * (-log_suffix_softmax(r, &rec.actions, sigma, j));
                }
            }
            acc
        }
    }
}

fn record_eval(
    ctx: &VariantCtx,
    data: &MultiwiseDataset,
    labels: &MultiwiseSoftLabels,
    rewards: &[f64],
    epoch: usize,
    trace: &mut TrainTrace,
) -> Result<()> {
    let r = RewardVector::new(rewards.to_vec())?;
    let empirical = total_loss(ctx, data, labels, &r);
    trace.records.push(TraceRecord {
        epoch,
        empirical_loss: empirical,
        population_loss: f64::NAN,
        rewards: rewards.to_vec(),
    });
    Ok(())
}

/// Gradient contribution of `idx` records, scaled by the full dataset size,
/// followed by the descent step.
#[allow(clippy::too_many_arguments)]
fn apply_batch(
    ctx: &VariantCtx,
    records: &[MultiwiseRecord],
    labels: &MultiwiseSoftLabels,
    idx: &[usize],
    rewards: &mut [f64],
    grad: &mut [f64],
    probs: &mut Vec<f64>,
    alpha: f64,
    n: usize,
) {
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let n = n as f64;
    for &i in idx {
        accumulate_record(ctx, &records[i], &labels.values[i], rewards, grad, n, probs);
    }
    for (r, g) in rewards.iter_mut().zip(grad.iter()) {
        *r -= alpha * g;
    }
}

fn accumulate_record(
    ctx: &VariantCtx,
    rec: &MultiwiseRecord,
    slots: &[f64],
    rewards: &[f64],
    grad: &mut [f64],
    n: f64,
    probs: &mut Vec<f64>,
) {
    let m = rec.actions.len();
    match ctx.variant {
        MultiwiseVariant::PairwiseSplit => {
            let mut s = 0;
            for j in 0..m {
                for k in j + 1..m {
                    let a = rec.actions[rec.ranking[j]];
                    let b = rec.actions[rec.ranking[k]];
                    let p = sigmoid(rewards[a] - rewards[b]);
                    let g = (p - slots[s]) / n;
                    grad[a] += g;
                    grad[b] -= g;
                    s += 1;
                }
            }
        }
        MultiwiseVariant::Ranking => {
            for (j, &y) in slots.iter().enumerate() {
                if y == 0.0 {
                    continue;
                }
                suffix_probs(rewards, &rec.actions, &rec.ranking, j, probs);
                for l in j..m {
                    let indicator = if l == j { 1.0 } else { 0.0 };
                    grad[rec.actions[rec.ranking[l]]] += y * (probs[l - j] - indicator) / n;
                }
            }
        }
        MultiwiseVariant::FullPermutation => {
            for (p, sigma) in ctx.perms.iter().enumerate() {
                for j in 0..m {
                    let y = slots[p * m + j];
                    if y == 0.0 {
                        continue;
                    }
                    suffix_probs(rewards, &rec.actions, sigma, j, probs);
                    for l in j..m {
                        let indicator = if l == j { 1.0 } else { 0.0 };
                        grad[rec.actions[sigma[l]]] += y * (probs[l - j] - indicator) / n;
                    }
                }
            }
        }
    }
}

fn update_labels(
    ctx: &VariantCtx,
    records: &[MultiwiseRecord],
    values: &mut [Vec<f64>],
    rewards: &[f64],
    beta: f64,
    probs: &mut Vec<f64>,
) {
    for (rec, slots) in records.iter().zip(values.iter_mut()) {
        let m = rec.actions.len();
        match ctx.variant {
            MultiwiseVariant::PairwiseSplit => {
                let mut s = 0;
                for j in 0..m {
                    for k in j + 1..m {
                        let a = rec.actions[rec.ranking[j]];
                        let b = rec.actions[rec.ranking[k]];
                        let p = sigmoid(rewards[a] - rewards[b]);
                        slots[s] = (1.0 - beta) * slots[s] + beta * p;
                        s += 1;
                    }
                }
            }
            MultiwiseVariant::Ranking => {
                for j in 0..m {
                    suffix_probs(rewards, &rec.actions, &rec.ranking, j, probs);
                    slots[j] = (1.0 - beta) * slots[j] + beta * probs[0];
                }
            }
            MultiwiseVariant::FullPermutation => {
                for (p, sigma) in ctx.perms.iter().enumerate() {
                    for j in 0..m {
                        suffix_probs(rewards, &rec.actions, sigma, j, probs);
                        let s = p * m + j;
                        slots[s] = (1.0 - beta) * slots[s] + beta * probs[0];
                    }
                }
            }
        }
    }
}

/// Softmax over the suffix `order[j..]` of the record's actions, written to
/// `out` so `out[l - j]` is the share of the action at rank `l`.
fn suffix_probs(rewards: &[f64], actions: &[usize], order: &[usize], j: usize, out: &mut Vec<f64>) {
    out.clear();
    let mut max = f64::NEG_INFINITY;
    for &pos in &order[j..] {
        max = max.max(rewards[actions[pos]]);
    }
    let mut z = 0.0;
    for &pos in &order[j..] {
        let e = (rewards[actions[pos]] - max).exp();
        out.push(e);
        z += e;
    }
    for e in out.iter_mut() {
        *e /= z;
    }
}

/// All permutations of `0..m` in lexicographic order.
fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            rec(prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}
