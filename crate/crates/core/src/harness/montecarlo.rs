//! Monte Carlo verifiers for the probabilistic claims the library rests on:
//! how often the sparse tail comparison of the hard instance is drawn and
//! misleading, how often the fitted reward ranks a wrong arm on top, and how
//! fast the estimate approaches the truth as the sample grows.
//!
//! The long-budget fits here run on count-aggregated data: the full-batch
//! gradient depends on the records only through per-pair win counts, so the
//! aggregated descent matches `fit_mle` step for step (up to float summation
//! order) while costing one term per distinct pair instead of one per record.

use std::collections::BTreeMap;

use rand::Rng;

use crate::data::{sample_pairwise_dataset, PairRecord, PairwiseDataset};
use crate::error::{Error, Result};
use crate::model::{btl_prob, hard_instance, sigmoid, ComparisonDistribution, RewardVector};
use crate::rng::{rng_from_seed, sub_seed};
use crate::train::{fit_ids, TrainConfig};

/// Standard normal quantile for the two-sided 95% level.
const Z_95: f64 = 1.96;

/// Epoch budget for "run the descent far past any reasonable stopping point"
/// fits, used when probing what the estimator converges to.
pub const LONG_FIT_EPOCHS: usize = 5000;

/// Step size for the long-budget fits.
const LONG_FIT_ALPHA: f64 = 1.0;

/// Heavy-pair comparisons in the two-pair showcase dataset.
pub const SHOWCASE_HEAVY_COMPARISONS: usize = 1000;

/// Empirical frequency of one named event with a Wilson 95% score interval.
#[derive(Debug, Clone)]
pub struct EventStat {
    pub name: String,
    pub count: usize,
    pub frequency: f64,
    /// Lower end of the Wilson score interval.
    pub low: f64,
    /// Upper end of the Wilson score interval.
    pub high: f64,
}

impl EventStat {
    fn new(name: &str, count: usize, trials: usize) -> Self {
        let (low, high) = wilson_interval(count, trials);
        EventStat {
            name: name.to_owned(),
            count,
            frequency: count as f64 / trials as f64,
            low,
            high,
        }
    }
}

/// Result of a Monte Carlo run: the trial count and one row per event.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub events: Vec<EventStat>,
}

impl MonteCarloReport {
    /// Looks an event up by name.
    pub fn event(&self, name: &str) -> Option<&EventStat> {
        self.events.iter().find(|e| e.name == name)
    }
}

/// Wilson 95% score interval for `count` successes in `trials` draws.
///
/// Unlike the Wald interval it stays inside [0, 1] and never collapses to a
/// point at counts of 0 or `trials`.
fn wilson_interval(count: usize, trials: usize) -> (f64, f64) {
    let n = trials as f64;
    let p = count as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    (
        (center - half).max(0.0),
        (center + half).min(1.0),
    )
}

/// Win counts for one unordered pair: `wins_a` of the `total` comparisons
/// ended with the lower-indexed arm `a` preferred.
#[derive(Debug, Clone)]
struct PairTally {
    a: usize,
    b: usize,
    wins_a: f64,
    total: f64,
}

fn tally_pairs(data: &PairwiseDataset) -> Vec<PairTally> {
    let mut map: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for rec in data.records() {
        let (lo, hi, lo_won) = if rec.a < rec.a_prime {
            (rec.a, rec.a_prime, rec.label == 1)
        } else {
            (rec.a_prime, rec.a, rec.label == 0)
        };
        let entry = map.entry((lo, hi)).or_insert((0.0, 0.0));
        if lo_won {
            entry.0 += 1.0;
        }
        entry.1 += 1.0;
    }
    map.into_iter()
        .map(|((a, b), (wins_a, total))| PairTally { a, b, wins_a, total })
        .collect()
}

/// Full-batch gradient descent on the count-aggregated empirical cross
/// entropy, starting from zero rewards. Calls `on_epoch` with the raw reward
/// vector after every update; stops early once the max-norm step falls below
/// `tol` (zero disables). Returns the raw (unnormalized) final rewards.
fn count_mle_descent(
    tallies: &[PairTally],
    num_arms: usize,
    n: f64,
    alpha: f64,
    epochs: usize,
    tol: f64,
    mut on_epoch: impl FnMut(usize, &[f64]),
) -> Vec<f64> {
    let mut rewards = vec![0.0; num_arms];
    let mut grad = vec![0.0; num_arms];
    for epoch in 1..=epochs {
        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for t in tallies {
            let p = sigmoid(rewards[t.a] - rewards[t.b]);
            let g = (t.total * p - t.wins_a) / n;
            grad[t.a] += g;
            grad[t.b] -= g;
        }
        let mut max_step = 0.0f64;
        for (r, g) in rewards.iter_mut().zip(&grad) {
            let step = alpha * g;
            *r -= step;
            max_step = max_step.max(step.abs());
        }
        on_epoch(epoch, &rewards);
        if tol > 0.0 && max_step < tol {
            break;
        }
    }
    rewards
}

/// Frequency of the sparse-tail events on the three-arm hard instance with
/// `n` comparisons: `single_tail_comparison` is "the pair (0, 2) was drawn
/// exactly once", `misleading_single_tail` additionally requires arm 2 to
/// have won that one comparison.
///
/// Requires `n > 500` so the pair probabilities 1 - 1/n and 1/n are in the
/// sparse regime the events are about.
pub fn tail_event_report(n: usize, trials: usize, seed: u64) -> Result<MonteCarloReport> {
    if n <= 500 {
        return Err(Error::config("tail event analysis needs n > 500"));
    }
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let (r_star, mu) = hard_instance(3, n)?;
    let mut single = 0usize;
    let mut misleading = 0usize;
    for trial in 0..trials {
        let data = sample_pairwise_dataset(&mu, &r_star, n, sub_seed(seed, trial as u64))?;
        let mut tail_count = 0usize;
        let mut tail_won = false;
        for rec in data.records() {
            let pair = if rec.a < rec.a_prime {
                (rec.a, rec.a_prime)
            } else {
                (rec.a_prime, rec.a)
            };
            if pair == (0, 2) {
                tail_count += 1;
                tail_won = (rec.a == 0) == (rec.label == 0);
            }
        }
        if tail_count == 1 {
            single += 1;
            if tail_won {
                misleading += 1;
            }
        }
    }
    Ok(MonteCarloReport {
        trials,
        events: vec![
            EventStat::new("single_tail_comparison", single, trials),
            EventStat::new("misleading_single_tail", misleading, trials),
        ],
    })
}

/// Frequency of `estimate_argmax_flip`: after a long-budget maximum
/// likelihood fit on a fresh draw of the hard instance, the top estimated
/// arm is not the true best arm 0.
pub fn estimate_flip_report(
    num_arms: usize,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let (r_star, mu) = hard_instance(num_arms, n)?;
    let mut flips = 0usize;
    for trial in 0..trials {
        let data = sample_pairwise_dataset(&mu, &r_star, n, sub_seed(seed, trial as u64))?;
        let tallies = tally_pairs(&data);
        let rewards = count_mle_descent(
            &tallies,
            num_arms,
            n as f64,
            LONG_FIT_ALPHA,
            LONG_FIT_EPOCHS,
            0.0,
            |_, _| {},
        );
        if argmax(&rewards) != 0 {
            flips += 1;
        }
    }
    Ok(MonteCarloReport {
        trials,
        events: vec![EventStat::new("estimate_argmax_flip", flips, trials)],
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Fits maximum likelihood rewards on `n` uniformly-paired comparisons drawn
/// under `r_star` and returns the sup-norm error of the normalized estimate
/// against the normalized truth. The error should shrink as `n` grows.
pub fn consistency_check(r_star: &RewardVector, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::config("need at least one comparison"));
    }
    let num_arms = r_star.num_arms();
    let mu = ComparisonDistribution::uniform(num_arms)?;
    let data = sample_pairwise_dataset(&mu, r_star, n, seed)?;
    let tallies = tally_pairs(&data);
    let raw = count_mle_descent(&tallies, num_arms, n as f64, 1.0, 2000, 1e-8, |_, _| {});
    let estimate = RewardVector::new(raw)?.normalized();
    let truth = r_star.normalized();
    let err = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(err)
}

/// Outcome of the two-pair showcase: a heavy pair (0, 1) with 1000
/// comparisons next to a tail pair (0, 2) seen exactly once.
#[derive(Debug, Clone)]
pub struct ShowcaseReport {
    /// Whether arm 2 won its single comparison.
    pub tail_win: bool,
    /// Long-budget maximum likelihood gap `r(0) - r(2)`; diverges toward
    /// minus infinity when the tail comparison went against arm 0.
    pub mle_gap: f64,
    /// Smoothed-fit gap `r(0) - r(2)`; stays bounded.
    pub ids_gap: f64,
    /// Smoothed-fit win probability of arm 0 over arm 1; should stay close
    /// to the population value 0.7311 because the heavy pair is well
    /// covered.
    pub ids_heavy_prob: f64,
}

fn showcase_dataset(seed: u64) -> Result<PairwiseDataset> {
    let r_star = RewardVector::new(vec![1.0, 0.0, 0.0])?;
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::with_capacity(SHOWCASE_HEAVY_COMPARISONS + 1);
    let p_heavy = btl_prob(&r_star, 0, 1);
    for _ in 0..SHOWCASE_HEAVY_COMPARISONS {
        let won = rng.gen::<f64>() < p_heavy;
        records.push(PairRecord {
            a: 0,
            a_prime: 1,
            label: u8::from(won),
        });
    }
    let p_tail = btl_prob(&r_star, 0, 2);
    let won = rng.gen::<f64>() < p_tail;
    records.push(PairRecord {
        a: 0,
        a_prime: 2,
        label: u8::from(won),
    });
    PairwiseDataset::from_records(3, seed, records)
}

/// Contrasts a long-budget maximum likelihood fit and a smoothed fit on the
/// showcase dataset drawn from `seed`.
///
/// When the tail comparison is misleading, maximum likelihood drives the
/// estimated gap to arm 2 without bound while the smoothed fit keeps it
/// small and still recovers the heavy pair's win probability.
pub fn sparse_pair_showcase(seed: u64) -> Result<ShowcaseReport> {
    let data = showcase_dataset(seed)?;
    let tail = data.records().last().expect("showcase dataset is nonempty");
    let tail_win = tail.label == 0;
    let n = data.len() as f64;

    let tallies = tally_pairs(&data);
    let raw = count_mle_descent(&tallies, 3, n, 0.5, 250_000, 0.0, |_, _| {});
    let mle_gap = raw[0] - raw[2];

    let mut cfg = TrainConfig::new(0.5, 0.05, 2000, seed);
    cfg.eval_every = 500;
    cfg.convergence_tol = 0.0;
    let (smoothed, _, _) = fit_ids(&data, &cfg, None)?;
    let ids_gap = smoothed.values()[0] - smoothed.values()[2];
    let ids_heavy_prob = btl_prob(&smoothed, 0, 1);

    Ok(ShowcaseReport {
        tail_win,
        mle_gap,
        ids_gap,
        ids_heavy_prob,
    })
}

/// Frequency with which arm 2 wins its single tail comparison across fresh
/// draws of the showcase dataset. The population value is
/// 1 / (1 + e) = 0.2689.
pub fn tail_win_report(trials: usize, seed: u64) -> Result<MonteCarloReport> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let mut wins = 0usize;
    for trial in 0..trials {
        let data = showcase_dataset(sub_seed(seed, trial as u64))?;
        let tail = data.records().last().expect("showcase dataset is nonempty");
        if tail.label == 0 {
            wins += 1;
        }
    }
    Ok(MonteCarloReport {
        trials,
        events: vec![EventStat::new("tail_arm_wins_single_comparison", wins, trials)],
    })
}

/// A dataset draw on which the long-budget fit comes to rank a wrong arm
/// above the true best arm by at least the requested margin.
#[derive(Debug, Clone)]
pub struct MisleadingEvent {
    /// Trial index within the scan.
    pub trial: u64,
    /// Seed that regenerates the dataset via `sample_pairwise_dataset`.
    pub dataset_seed: u64,
    /// First descent epoch at which some wrong arm led arm 0 by the margin.
    pub crossing_epoch: usize,
    /// Raw reward vector at the crossing epoch.
    pub rewards_at_crossing: Vec<f64>,
    /// Raw reward vector after the full epoch budget.
    pub final_rewards: Vec<f64>,
}

/// Margin at which a wrong arm's estimate is declared to dominate: at tilt
/// strength `lambda_max` the tilted policy favors it over the true best arm
/// by a factor of 100.
pub fn dominance_margin(lambda_max: f64) -> f64 {
    100f64.ln() / lambda_max
}

/// Scans fresh draws of the hard instance for the first one whose
/// long-budget maximum likelihood descent ranks a wrong arm above arm 0 by
/// `margin`, recording the reward snapshot at the crossing epoch. Returns
/// `None` when no draw among `max_trials` crosses within the epoch budget.
pub fn misleading_event_scan(
    num_arms: usize,
    n: usize,
    margin: f64,
    max_trials: u64,
    seed: u64,
) -> Result<Option<MisleadingEvent>> {
    if !(margin.is_finite() && margin > 0.0) {
        return Err(Error::config("margin must be positive and finite"));
    }
    let (r_star, mu) = hard_instance(num_arms, n)?;
    for trial in 0..max_trials {
        let dataset_seed = sub_seed(seed, trial);
        let data = sample_pairwise_dataset(&mu, &r_star, n, dataset_seed)?;
        let tallies = tally_pairs(&data);
        let mut crossing: Option<(usize, Vec<f64>)> = None;
        let final_rewards = count_mle_descent(
            &tallies,
            num_arms,
            n as f64,
            LONG_FIT_ALPHA,
            LONG_FIT_EPOCHS,
            0.0,
            |epoch, rewards| {
                if crossing.is_none() {
                    let lead = rewards
                        .iter()
                        .skip(1)
                        .map(|v| v - rewards[0])
                        .fold(f64::NEG_INFINITY, f64::max);
                    if lead >= margin {
                        crossing = Some((epoch, rewards.to_vec()));
                    }
                }
            },
        );
        if let Some((crossing_epoch, rewards_at_crossing)) = crossing {
            return Ok(Some(MisleadingEvent {
                trial,
                dataset_seed,
                crossing_epoch,
                rewards_at_crossing,
                final_rewards,
            }));
        }
    }
    Ok(None)
}
