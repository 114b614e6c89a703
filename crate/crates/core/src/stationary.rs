//! Population fixed-point diagnostics for the smoothing estimators.
//!
//! In the infinite-sample limit the smoothing dynamics act on a reward
//! vector together with one label (or confidence) per compared pair. A
//! state is stationary when both the reward gradient and every label
//! update vanish. This module evaluates those residuals at an arbitrary
//! state, which makes the contrast between the two variants testable:
//!
//! * label smoothing admits no stationary point that separates arms: the
//!   residuals only vanish at a constant reward vector with labels 1/2;
//! * confidence weighting is stationary exactly at the true reward
//!   differences with confidences matching the model probabilities.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{sigmoid, ComparisonDistribution, RewardVector};

/// Which smoothing dynamic the residual describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdsVariant {
    /// Per-record labels relax toward the model probability.
    LabelSmoothing,
    /// Hard labels with per-record confidence weights `max(2c - 1, 0)`.
    ConfidenceWeighted,
}

/// One scalar per compared pair, stored against the canonical (low, high)
/// index order. Reading a pair in the opposite order flips the value, since
/// a label meaning "low beats high with probability y" means "high beats
/// low with probability 1 - y".
#[derive(Debug, Clone)]
pub struct PairLabels {
    num_arms: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl PairLabels {
    pub fn new(num_arms: usize) -> Self {
        PairLabels { num_arms, entries: BTreeMap::new() }
    }

    /// Same value on every support pair of `mu`.
    pub fn constant(mu: &ComparisonDistribution, value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::config("pair labels must lie in [0, 1]"));
        }
        let mut labels = PairLabels::new(mu.num_arms());
        for (a, b, _) in mu.support() {
            labels.entries.insert((a, b), value);
        }
        Ok(labels)
    }

    /// Model-matching state: each pair's value is the probability the
    /// lower-indexed arm wins under `r`. This zeroes the label residual by
    /// construction, isolating the reward residual.
    pub fn from_reward(mu: &ComparisonDistribution, r: &RewardVector) -> Result<Self> {
        if r.num_arms() != mu.num_arms() {
            return Err(Error::config("reward dimension does not match distribution"));
        }
        let mut labels = PairLabels::new(mu.num_arms());
        for (a, b, _) in mu.support() {
            labels.entries.insert((a, b), sigmoid(r.values()[a] - r.values()[b]));
        }
        Ok(labels)
    }

    pub fn set(&mut self, a: usize, b: usize, value: f64) -> Result<()> {
        if a == b || a >= self.num_arms || b >= self.num_arms {
            return Err(Error::config("pair indices must be distinct arms"));
        }
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::config("pair labels must lie in [0, 1]"));
        }
        if a < b {
            self.entries.insert((a, b), value);
        } else {
            self.entries.insert((b, a), 1.0 - value);
        }
        Ok(())
    }

    /// Value oriented as "probability `a` beats `b`"; None when the pair
    /// was never assigned.
    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        if a < b {
            self.entries.get(&(a, b)).copied()
        } else {
            self.entries.get(&(b, a)).map(|y| 1.0 - y)
        }
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }
}

/// Residuals of the population fixed-point equations. Both parts are zero
/// exactly at a stationary state of the corresponding dynamic.
#[derive(Debug, Clone)]
pub struct StationarityResidual {
    /// Negative population gradient per arm; entries sum to zero.
    pub reward: Vec<f64>,
    /// Per canonical pair: stored value minus its relaxation target.
    pub labels: Vec<((usize, usize), f64)>,
}

impl StationarityResidual {
    pub fn max_abs(&self) -> f64 {
        let r = self.reward.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        self.labels.iter().fold(r, |m, (_, x)| m.max(x.abs()))
    }
}

/// Evaluates the population fixed-point equations at the state
/// `(r_hat, labels)` when preferences are generated by `r_star` and pairs
/// are drawn from `mu`.
///
/// For [`IdsVariant::LabelSmoothing`] the `labels` values are smoothed
/// labels; for [`IdsVariant::ConfidenceWeighted`] they are confidences.
/// The per-pair residual is the gap to the relaxation target (the model
/// probability) in both cases; the reward residual differs:
///
/// * label smoothing pulls each pair toward the mass-weighted mix of the
///   stored label over observed outcomes, so the per-arm term is
///   `mu * ((p* y + (1-p*)(1-y)) sigma(-d) - ((1-p*) y + p* (1-y)) sigma(d))`;
/// * confidence weighting keeps hard outcomes and scales the pull by
///   `max(2c - 1, 0)`, giving `mu * w * (p* sigma(-d) - (1-p*) sigma(d))`;
///
/// with `d` the estimated reward difference and `p*` the true win
/// probability of the pair.
pub fn ids_population_residual(
    mu: &ComparisonDistribution,
    r_star: &RewardVector,
    r_hat: &RewardVector,
    labels: &PairLabels,
    variant: IdsVariant,
) -> Result<StationarityResidual> {
    let k = mu.num_arms();
    if r_star.num_arms() != k || r_hat.num_arms() != k || labels.num_arms() != k {
        return Err(Error::config("dimension mismatch between inputs"));
    }
    if !mu.is_connected() {
        return Err(Error::config(
            "comparison distribution must connect all arms for a population analysis",
        ));
    }

    let mut reward = vec![0.0; k];
    let mut label_residuals = Vec::new();
    for (a, b, mass) in mu.support() {
        let d = r_hat.values()[a] - r_hat.values()[b];
        let p_star = sigmoid(r_star.values()[a] - r_star.values()[b]);
        let y = labels
            .get(a, b)
            .ok_or_else(|| Error::config(format!("no label for compared pair ({a}, {b})")))?;

        label_residuals.push(((a, b), y - sigmoid(d)));

        let pull = match variant {
            IdsVariant::LabelSmoothing => {
                let toward = p_star * y + (1.0 - p_star) * (1.0 - y);
                let away = (1.0 - p_star) * y + p_star * (1.0 - y);
                toward * sigmoid(-d) - away * sigmoid(d)
            }
            IdsVariant::ConfidenceWeighted => {
                let w = (2.0 * y - 1.0).max(0.0);
                w * (p_star * sigmoid(-d) - (1.0 - p_star) * sigmoid(d))
            }
        };
        reward[a] += mass * pull;
        reward[b] -= mass * pull;
    }

    Ok(StationarityResidual { reward, labels: label_residuals })
}
