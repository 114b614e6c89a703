//! KL-regularized policies induced by a reward estimate.
//!
//! Against a reference policy, the optimal policy for a reward estimate
//! under a KL budget is an exponential tilt of the reference: weight each
//! arm by the exponentiated scaled reward and renormalize. The tilt
//! strength `lambda` sweeps from the reference policy (0) to a point mass
//! on the estimated best arm (infinity). Because everything is closed
//! form, the tradeoff between KL spent and true reward earned is exactly
//! computable, which is what exposes reward overoptimization: tilting
//! toward a bad estimate buys proxy reward while the true reward falls.

use crate::error::{Error, Result};
use crate::model::RewardVector;

/// Probability distribution over arms.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyVector {
    probs: Vec<f64>,
}

impl PolicyVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::config("policy needs at least one arm"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::config("policy entries must be finite and nonnegative"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("policy entries sum to {sum}, expected 1")));
        }
        Ok(PolicyVector { probs })
    }

    pub fn uniform(num_arms: usize) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::config("policy needs at least one arm"));
        }
        Ok(PolicyVector { probs: vec![1.0 / num_arms as f64; num_arms] })
    }

    pub fn point_mass(num_arms: usize, arm: usize) -> Result<Self> {
        if arm >= num_arms {
            return Err(Error::config("point mass arm out of range"));
        }
        let mut probs = vec![0.0; num_arms];
        probs[arm] = 1.0;
        Ok(PolicyVector { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_arms(&self) -> usize {
        self.probs.len()
    }
}

/// One point on a KL-reward tradeoff curve.
#[derive(Debug, Clone, Copy)]
pub struct KlRewardPoint {
    pub lambda: f64,
    /// KL divergence from the reference policy, in nats.
    pub kl: f64,
    /// Expected reward under the generating rewards.
    pub true_reward: f64,
    /// Expected reward under the estimate the policy was tilted toward.
    pub proxy_reward: f64,
}

fn check_tilt_inputs(r_hat: &RewardVector, pi0: &PolicyVector, lambda: f64) -> Result<()> {
    if r_hat.num_arms() != pi0.num_arms() {
        return Err(Error::config("reward and policy dimensions differ"));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::config("lambda must be finite and nonnegative"));
    }
    Ok(())
}

/// Exponential tilt of `pi0` toward `r_hat` with strength `lambda`,
/// computed with max-subtraction so large `lambda * reward` products cannot
/// overflow. Arms with zero reference probability stay at zero.
pub fn closed_form_policy(
    r_hat: &RewardVector,
    pi0: &PolicyVector,
    lambda: f64,
) -> Result<PolicyVector> {
    check_tilt_inputs(r_hat, pi0, lambda)?;
    let logits: Vec<f64> = pi0
        .probs()
        .iter()
        .zip(r_hat.values())
        .map(|(p, r)| p.ln() + lambda * r)
        .collect();
    let top = logits.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    if top == f64::NEG_INFINITY {
        return Err(Error::numeric("reference policy has empty support"));
    }
    let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    PolicyVector::new(weights.iter().map(|w| w / total).collect())
}

/// `KL(pi_lambda || pi0)` evaluated in closed form:
/// `lambda * E_{pi_lambda}[r_hat] - log sum_a pi0(a) exp(lambda r_hat(a))`.
pub fn kl_closed_form(r_hat: &RewardVector, pi0: &PolicyVector, lambda: f64) -> Result<f64> {
    check_tilt_inputs(r_hat, pi0, lambda)?;
    let tilted = closed_form_policy(r_hat, pi0, lambda)?;
    let mean_proxy = expected_true_reward(&tilted, r_hat)?;
    let logits: Vec<f64> = pi0
        .probs()
        .iter()
        .zip(r_hat.values())
        .map(|(p, r)| p.ln() + lambda * r)
        .collect();
    let top = logits.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x));
    let lse = top + logits.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
    // exact value is nonnegative; clamp float dust
    Ok((lambda * mean_proxy - lse).max(0.0))
}

/// Expected reward of a policy: plain dot product.
pub fn expected_true_reward(policy: &PolicyVector, rewards: &RewardVector) -> Result<f64> {
    if policy.num_arms() != rewards.num_arms() {
        return Err(Error::config("reward and policy dimensions differ"));
    }
    Ok(policy
        .probs()
        .iter()
        .zip(rewards.values())
        .map(|(p, r)| p * r)
        .sum())
}

/// Gap between the best single arm and what the policy earns; always >= 0.
pub fn suboptimality(policy: &PolicyVector, r_star: &RewardVector) -> Result<f64> {
    Ok(r_star.max_value() - expected_true_reward(policy, r_star)?)
}

/// Sweeps the tilt strength over `lambdas` (nonempty, ascending,
/// nonnegative) and records KL, true reward, and proxy reward at each.
pub fn kl_reward_curve(
    r_hat: &RewardVector,
    r_star: &RewardVector,
    pi0: &PolicyVector,
    lambdas: &[f64],
) -> Result<Vec<KlRewardPoint>> {
    if lambdas.is_empty() {
        return Err(Error::config("lambda grid must be nonempty"));
    }
    if lambdas.windows(2).any(|w| w[0] >= w[1]) && lambdas.len() > 1 {
        return Err(Error::config("lambda grid must be strictly ascending"));
    }
    if r_star.num_arms() != r_hat.num_arms() {
        return Err(Error::config("estimate and truth dimensions differ"));
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let policy = closed_form_policy(r_hat, pi0, lambda)?;
            Ok(KlRewardPoint {
                lambda,
                kl: kl_closed_form(r_hat, pi0, lambda)?,
                true_reward: expected_true_reward(&policy, r_star)?,
                proxy_reward: expected_true_reward(&policy, r_hat)?,
            })
        })
        .collect()
}

/// Zero plus 40 geometrically spaced tilt strengths from 1e-2 to 1e3.
pub fn default_lambda_grid() -> Vec<f64> {
    let mut grid = vec![0.0];
    let (lo, hi, count) = (1e-2f64, 1e3f64, 40usize);
    let ratio = (hi / lo).powf(1.0 / (count - 1) as f64);
    let mut x = lo;
    for _ in 0..count {
        grid.push(x);
        x *= ratio;
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn rv(v: &[f64]) -> RewardVector {
        RewardVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn zero_tilt_returns_reference() {
        let pi0 = PolicyVector::new(vec![0.5, 0.3, 0.2]).unwrap();
        let r = rv(&[3.0, -1.0, 0.0]);
        let tilted = closed_form_policy(&r, &pi0, 0.0).unwrap();
        for (a, b) in tilted.probs().iter().zip(pi0.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(kl_closed_form(&r, &pi0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn two_arm_unit_tilt() {
        let pi0 = PolicyVector::uniform(2).unwrap();
        let r = rv(&[1.0, 0.0]);
        let tilted = closed_form_policy(&r, &pi0, 1.0).unwrap();
        assert!((tilted.probs()[0] - 0.7310585786300049).abs() < 1e-12);
        assert!((tilted.probs()[1] - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn huge_tilt_concentrates_on_argmax() {
        let pi0 = PolicyVector::uniform(5).unwrap();
        let r = rv(&[0.1, 0.7, 0.3, 0.0, 0.69]);
        let tilted = closed_form_policy(&r, &pi0, 1e6).unwrap();
        assert!((tilted.probs()[1] - 1.0).abs() < 1e-6);
        // KL against uniform approaches log K
        let kl = kl_closed_form(&r, &pi0, 1e6).unwrap();
        assert!((kl - 5.0f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn kl_matches_definition_on_random_instances() {
        let mut rng = rng_from_seed(31);
        for _ in 0..50 {
            let k = rng.gen_range(2..=8);
            let r = rv(&(0..k).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<_>>());
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let pi0 = PolicyVector::new(raw.iter().map(|x| x / total).collect()).unwrap();
            let lambda = rng.gen_range(0.0..20.0);

            let closed = kl_closed_form(&r, &pi0, lambda).unwrap();
            let tilted = closed_form_policy(&r, &pi0, lambda).unwrap();
            let direct: f64 = tilted
                .probs()
                .iter()
                .zip(pi0.probs())
                .filter(|(p, _)| **p > 0.0)
                .map(|(p, q)| p * (p / q).ln())
                .sum();
            assert!((closed - direct).abs() < 1e-10, "{closed} vs {direct}");
        }
    }

    #[test]
    fn expectation_and_suboptimality_match_hand_values() {
        let r_star = rv(&[1.0, 0.0, 0.0]);
        let best = PolicyVector::point_mass(3, 0).unwrap();
        let worst = PolicyVector::point_mass(3, 2).unwrap();
        let uniform = PolicyVector::uniform(3).unwrap();
        assert_eq!(expected_true_reward(&best, &r_star).unwrap(), 1.0);
        assert_eq!(suboptimality(&best, &r_star).unwrap(), 0.0);
        assert_eq!(suboptimality(&worst, &r_star).unwrap(), 1.0);
        assert!((expected_true_reward(&uniform, &r_star).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((suboptimality(&uniform, &r_star).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn curve_monotonicities() {
        let pi0 = PolicyVector::uniform(4).unwrap();
        let r_star = rv(&[1.0, 0.0, 0.0, 0.0]);
        let grid = default_lambda_grid();

        // accurate estimate: the true reward climbs along the whole curve
        let points = kl_reward_curve(&r_star, &r_star, &pi0, &grid).unwrap();
        for w in points.windows(2) {
            assert!(w[1].true_reward >= w[0].true_reward - 1e-12);
            assert!(w[1].kl >= w[0].kl - 1e-12);
        }

        // any estimate: proxy reward and KL are nondecreasing in lambda
        let r_hat = rv(&[0.2, 0.9, -0.4, 0.0]);
        let points = kl_reward_curve(&r_hat, &r_star, &pi0, &grid).unwrap();
        for w in points.windows(2) {
            assert!(w[1].proxy_reward >= w[0].proxy_reward - 1e-12);
            assert!(w[1].kl >= w[0].kl - 1e-12);
        }
        // tilting toward the wrong argmax forfeits true reward
        assert!(points.last().unwrap().true_reward < 0.05);
    }

    #[test]
    fn misleading_estimate_shows_rise_then_fall() {
        // arm 1 slightly outranks the truly best arm 0 in the estimate;
        // moderate tilts still favor arm 0 over the rest, huge tilts lock
        // onto arm 1 and give the true reward back
        let pi0 = PolicyVector::uniform(4).unwrap();
        let r_star = rv(&[1.0, 0.0, 0.0, 0.0]);
        let r_hat = rv(&[1.0, 1.05, -2.0, -2.0]);
        let points = kl_reward_curve(&r_hat, &r_star, &pi0, &default_lambda_grid()).unwrap();
        let peak = points.iter().map(|p| p.true_reward).fold(f64::MIN, f64::max);
        let last = points.last().unwrap().true_reward;
        let first = points.first().unwrap().true_reward;
        assert!(peak > first + 0.1, "tilt should first help: {first} -> {peak}");
        assert!(last < peak - 0.3, "then overoptimize: {peak} -> {last}");
    }

    #[test]
    fn single_zero_lambda_curve() {
        let pi0 = PolicyVector::uniform(3).unwrap();
        let r_star = rv(&[1.0, 0.0, 0.0]);
        let r_hat = rv(&[0.0, 2.0, 0.0]);
        let points = kl_reward_curve(&r_hat, &r_star, &pi0, &[0.0]).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].kl, 0.0);
        assert!((points[0].true_reward - 1.0 / 3.0).abs() < 1e-15);
        assert!((points[0].proxy_reward - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shift_invariance() {
        let pi0 = PolicyVector::new(vec![0.6, 0.1, 0.3]).unwrap();
        let r = rv(&[0.4, -1.0, 2.0]);
        let shifted = rv(&[100.4, 99.0, 102.0]);
        for lambda in [0.0, 0.3, 5.0, 400.0] {
            let a = closed_form_policy(&r, &pi0, lambda).unwrap();
            let b = closed_form_policy(&shifted, &pi0, lambda).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_support_arms_stay_dead() {
        let pi0 = PolicyVector::new(vec![0.5, 0.5, 0.0]).unwrap();
        let r = rv(&[0.0, 0.0, 50.0]);
        for lambda in [0.1, 1.0, 100.0] {
            let tilted = closed_form_policy(&r, &pi0, lambda).unwrap();
            assert_eq!(tilted.probs()[2], 0.0);
        }
    }

    #[test]
    fn default_grid_shape() {
        let grid = default_lambda_grid();
        assert_eq!(grid.len(), 41);
        assert_eq!(grid[0], 0.0);
        assert!((grid[1] - 1e-2).abs() < 1e-15);
        assert!((grid.last().unwrap() - 1e3).abs() < 1e-9);
        for w in grid.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn validation_errors() {
        let pi0 = PolicyVector::uniform(3).unwrap();
        let r = rv(&[1.0, 0.0, 0.0]);
        assert!(closed_form_policy(&r, &pi0, -1.0).is_err());
        assert!(closed_form_policy(&r, &pi0, f64::NAN).is_err());
        assert!(closed_form_policy(&rv(&[1.0, 0.0]), &pi0, 1.0).is_err());
        assert!(PolicyVector::new(vec![0.5, 0.6]).is_err());
        assert!(PolicyVector::new(vec![1.5, -0.5]).is_err());
        assert!(PolicyVector::new(vec![]).is_err());
        assert!(PolicyVector::point_mass(3, 7).is_err());
        let r_star = rv(&[1.0, 0.0, 0.0]);
        assert!(kl_reward_curve(&r, &r_star, &pi0, &[]).is_err());
        assert!(kl_reward_curve(&r, &r_star, &pi0, &[1.0, 0.5]).is_err());
    }
}
