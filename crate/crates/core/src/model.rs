//! Preference models over bandit arms.
//!
//! Pairwise choices follow a Bradley-Terry-Luce model: arm `a` beats arm
//! `a'` with probability `sigmoid(r(a) - r(a'))`. Rankings of M-tuples follow
//! the Plackett-Luce extension. Arms are 0-based everywhere.

use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-arm reward table with a designated reference arm.
///
/// The reference arm resolves the shift invariance of preference models:
/// adding a constant to all rewards leaves every choice probability
/// unchanged, so reported estimates pin `values[reference_arm]` to zero via
/// [`RewardVector::normalized`]. Optimization itself runs on raw values.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardVector {
    values: Vec<f64>,
    reference_arm: usize,
}

impl RewardVector {
    /// Reference arm defaults to the last arm.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::config("reward vector needs at least 2 arms"));
        }
        let reference_arm = values.len() - 1;
        Self::with_reference(values, reference_arm)
    }

    pub fn with_reference(values: Vec<f64>, reference_arm: usize) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::config("reward vector needs at least 2 arms"));
        }
        if reference_arm >= values.len() {
            return Err(Error::config(format!(
                "reference arm {reference_arm} out of range for {} arms",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("reward entries must be finite"));
        }
        Ok(RewardVector { values, reference_arm })
    }

    pub fn num_arms(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn reference_arm(&self) -> usize {
        self.reference_arm
    }

    /// Shifted copy with the reference arm pinned to zero.
    pub fn normalized(&self) -> RewardVector {
        let shift = self.values[self.reference_arm];
        RewardVector {
            values: self.values.iter().map(|v| v - shift).collect(),
            reference_arm: self.reference_arm,
        }
    }

    /// First arm attaining the maximum reward.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (a, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = a;
            }
        }
        best
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// P(a beats a_prime) under the Bradley-Terry-Luce model. Panics on
/// out-of-range arm indices, as any slice access does.
pub fn btl_prob(r: &RewardVector, a: usize, a_prime: usize) -> f64 {
    sigmoid(r.values()[a] - r.values()[a_prime])
}

/// Probability of observing the full ranking `sigma` over `actions` under
/// the Plackett-Luce model.
///
/// `sigma[j]` is the index into `actions` placed at rank `j` (rank 0 is the
/// most preferred). Evaluated as `exp` of a sum of log-softmax terms over
/// suffixes, which keeps large rewards from overflowing.
pub fn pl_permutation_prob(r: &RewardVector, actions: &[usize], sigma: &[usize]) -> Result<f64> {
    let m = actions.len();
    if m < 2 {
        return Err(Error::config("ranking needs at least 2 actions"));
    }
    if sigma.len() != m || !is_permutation(sigma, m) {
        return Err(Error::config("sigma must be a permutation of the action positions"));
    }
    let mut log_p = 0.0;
    for j in 0..m {
        log_p += log_suffix_softmax(r, actions, sigma, j);
    }
    Ok(log_p.exp())
}

/// log of exp(r[a_{sigma[j]}]) / sum_{k >= j} exp(r[a_{sigma[k]}]).
pub(crate) fn log_suffix_softmax(r: &RewardVector, actions: &[usize], sigma: &[usize], j: usize) -> f64 {
    let vals = r.values();
    let mut max = f64::NEG_INFINITY;
    for &pos in &sigma[j..] {
        max = max.max(vals[actions[pos]]);
    }
    let mut denom = 0.0;
    for &pos in &sigma[j..] {
        denom += (vals[actions[pos]] - max).exp();
    }
    (vals[actions[sigma[j]]] - max) - denom.ln()
}

pub(crate) fn is_permutation(sigma: &[usize], m: usize) -> bool {
    let mut seen = vec![false; m];
    for &s in sigma {
        if s >= m || seen[s] {
            return false;
        }
        seen[s] = true;
    }
    sigma.len() == m
}

/// Symmetric sampling distribution over unordered arm pairs.
///
/// `mass(a, b)` is the probability that a sample compares `{a, b}`; masses
/// over unordered pairs sum to one. The marginal `mu(a) = sum_b mass(a, b)`
/// therefore counts every comparison the arm participates in.
#[derive(Debug, Clone)]
pub struct ComparisonDistribution {
    num_arms: usize,
    // row-major K x K, symmetric, zero diagonal
    mass: Vec<f64>,
}

impl ComparisonDistribution {
    /// Builds from a list of per-pair masses `(a, b, mass)`. Pairs may be
    /// given in either orientation but at most once.
    pub fn from_pairs(num_arms: usize, pairs: &[(usize, usize, f64)]) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::config("need at least 2 arms"));
        }
        let mut mass = vec![0.0; num_arms * num_arms];
        let mut total = 0.0;
        for &(a, b, m) in pairs {
            if a >= num_arms || b >= num_arms {
                return Err(Error::config(format!("pair ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::config("an arm cannot be compared with itself"));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::config("pair masses must be finite and nonnegative"));
            }
            let (lo, hi) = (a.min(b), a.max(b));
            if mass[lo * num_arms + hi] != 0.0 {
                return Err(Error::config(format!("pair ({lo},{hi}) specified twice")));
            }
            mass[lo * num_arms + hi] = m;
            mass[hi * num_arms + lo] = m;
            total += m;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("pair masses sum to {total}, expected 1")));
        }
        Ok(ComparisonDistribution { num_arms, mass })
    }

    /// Uniform mass over all K(K-1)/2 unordered pairs.
    pub fn uniform(num_arms: usize) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::config("need at least 2 arms"));
        }
        let m = 1.0 / (num_arms * (num_arms - 1) / 2) as f64;
        let pairs: Vec<(usize, usize, f64)> = (0..num_arms)
            .flat_map(|a| ((a + 1)..num_arms).map(move |b| (a, b, m)))
            .collect();
        Self::from_pairs(num_arms, &pairs)
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn mass(&self, a: usize, b: usize) -> f64 {
        self.mass[a * self.num_arms + b]
    }

    /// Marginal probability that arm `a` appears in a sampled comparison.
    pub fn marginal(&self, a: usize) -> f64 {
        (0..self.num_arms).map(|b| self.mass(a, b)).sum()
    }

    /// Unordered pairs with positive mass, as (a, b, mass) with a < b.
    pub fn support(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for a in 0..self.num_arms {
            for b in (a + 1)..self.num_arms {
                let m = self.mass(a, b);
                if m > 0.0 {
                    out.push((a, b, m));
                }
            }
        }
        out
    }

    /// True when the support graph connects all arms. Disconnected graphs
    /// leave reward differences across components unidentifiable.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_arms];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(a) = stack.pop() {
            for b in 0..self.num_arms {
                if !seen[b] && self.mass(a, b) > 0.0 {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Instance family on which maximum likelihood provably overfits.
///
/// The first arm is optimal (`r*(0) = 1`, all other rewards 0). The pair
/// (0, 1) carries almost all comparison mass while each remaining pair
/// (0, k) receives mass 1/n, so with n samples those pairs are observed about
/// once. A single comparison lost by arm 0 sends its MLE difference to
/// infinity, which is the divergence event the Monte Carlo harness measures.
///
/// Requires `num_arms >= 3` and `n >= num_arms - 2` so the sparse pairs do
/// not exhaust the unit of mass.
pub fn hard_instance(num_arms: usize, n: usize) -> Result<(RewardVector, ComparisonDistribution)> {
    if num_arms < 3 {
        return Err(Error::config("hard instance needs at least 3 arms"));
    }
    if n < num_arms - 2 {
        return Err(Error::config(format!(
            "hard instance with {num_arms} arms needs n >= {}",
            num_arms - 2
        )));
    }
    let mut values = vec![0.0; num_arms];
    values[0] = 1.0;
    let r_star = RewardVector::new(values)?;

    let sparse = 1.0 / n as f64;
    let mut pairs = vec![(0, 1, 1.0 - (num_arms - 2) as f64 * sparse)];
    for k in 2..num_arms {
        pairs.push((0, k, sparse));
    }
    let mu = ComparisonDistribution::from_pairs(num_arms, &pairs)?;
    Ok((r_star, mu))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rv(values: &[f64]) -> RewardVector {
        RewardVector::new(values.to_vec()).unwrap()
    }

    #[test]
    fn btl_matches_logistic_of_difference() {
        let r = rv(&[1.0, 0.0, 0.0]);
        assert!((btl_prob(&r, 0, 1) - 0.7310585786300049).abs() < 1e-15);
        assert!((btl_prob(&r, 0, 2) - 0.7310585786300049).abs() < 1e-15);
        assert!((btl_prob(&r, 1, 2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn btl_complementary() {
        let r = rv(&[0.3, -1.2, 2.0, 0.0]);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!((btl_prob(&r, a, b) + btl_prob(&r, b, a) - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn btl_extreme_rewards_saturate_without_nan() {
        let r = rv(&[600.0, -600.0]);
        assert_eq!(btl_prob(&r, 0, 1), 1.0);
        assert_eq!(btl_prob(&r, 1, 0), 0.0);
    }

    #[test]
    fn sigmoid_stable_on_both_tails() {
        assert!(sigmoid(-745.0) > 0.0);
        assert!(sigmoid(745.0) < 1.0 + 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn pl_two_actions_reduces_to_btl() {
        let r = rv(&[0.7, -0.4, 0.1]);
        let p = pl_permutation_prob(&r, &[0, 2], &[0, 1]).unwrap();
        assert!((p - btl_prob(&r, 0, 2)).abs() < 1e-15);
        let q = pl_permutation_prob(&r, &[0, 2], &[1, 0]).unwrap();
        assert!((q - btl_prob(&r, 2, 0)).abs() < 1e-15);
    }

    #[test]
    fn pl_uniform_rewards_give_uniform_rankings() {
        let r = rv(&[0.0, 0.0, 0.0]);
        let p = pl_permutation_prob(&r, &[0, 1, 2], &[2, 0, 1]).unwrap();
        assert!((p - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pl_identity_ranking_hand_value() {
        // independent evaluation of the product formula
        let r = rv(&[1.0, 0.0, 0.0]);
        let e = 1.0f64.exp();
        let expected = (e / (e + 2.0)) * 0.5;
        let p = pl_permutation_prob(&r, &[0, 1, 2], &[0, 1, 2]).unwrap();
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn pl_probabilities_sum_to_one_over_permutations() {
        let r = rv(&[0.9, -0.3, 0.2, 1.4]);
        let actions = [0, 1, 2, 3];
        let mut total = 0.0;
        // lexicographic enumeration of all 24 permutations
        let mut sigma = [0usize; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        sigma = [a, b, c, d];
                        if is_permutation(&sigma, 4) {
                            total += pl_permutation_prob(&r, &actions, &sigma).unwrap();
                        }
                    }
                }
            }
        }
        let _ = sigma;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pl_rejects_invalid_sigma() {
        let r = rv(&[0.0, 0.0, 0.0]);
        assert!(pl_permutation_prob(&r, &[0, 1, 2], &[0, 1, 1]).is_err());
        assert!(pl_permutation_prob(&r, &[0, 1], &[0]).is_err());
    }

    #[test]
    fn reward_vector_validation() {
        assert!(RewardVector::new(vec![1.0]).is_err());
        assert!(RewardVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RewardVector::with_reference(vec![1.0, 0.0], 5).is_err());
    }

    #[test]
    fn normalization_pins_reference_arm() {
        let r = RewardVector::with_reference(vec![2.0, 1.0, 0.5], 2).unwrap().normalized();
        assert_eq!(r.values(), &[1.5, 0.5, 0.0]);
        // probabilities are shift invariant
        let raw = RewardVector::with_reference(vec![2.0, 1.0, 0.5], 2).unwrap();
        assert!((btl_prob(&raw, 0, 1) - btl_prob(&r, 0, 1)).abs() < 1e-15);
    }

    #[test]
    fn hard_instance_masses() {
        let (r_star, mu) = hard_instance(3, 500).unwrap();
        assert_eq!(r_star.values(), &[1.0, 0.0, 0.0]);
        assert!((mu.mass(0, 1) - 0.998).abs() < 1e-15);
        assert!((mu.mass(0, 2) - 0.002).abs() < 1e-15);
        assert_eq!(mu.mass(1, 2), 0.0);
        assert!((mu.marginal(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_instance_many_arms() {
        let (_, mu) = hard_instance(10, 60).unwrap();
        for k in 2..10 {
            assert!((mu.mass(0, k) - 1.0 / 60.0).abs() < 1e-15);
        }
        assert!((mu.mass(0, 1) - 52.0 / 60.0).abs() < 1e-15);
        let total: f64 = mu.support().iter().map(|&(_, _, m)| m).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hard_instance_rejects_degenerate_sizes() {
        assert!(hard_instance(2, 100).is_err());
        assert!(hard_instance(10, 7).is_err());
    }

    #[test]
    fn uniform_distribution_is_connected() {
        let mu = ComparisonDistribution::uniform(5).unwrap();
        assert!(mu.is_connected());
        let split = ComparisonDistribution::from_pairs(4, &[(0, 1, 0.5), (2, 3, 0.5)]).unwrap();
        assert!(!split.is_connected());
    }

    #[test]
    fn distribution_rejects_bad_mass() {
        assert!(ComparisonDistribution::from_pairs(3, &[(0, 1, 0.5)]).is_err());
        assert!(ComparisonDistribution::from_pairs(3, &[(0, 0, 1.0)]).is_err());
        assert!(ComparisonDistribution::from_pairs(3, &[(0, 1, 0.7), (1, 0, 0.3)]).is_err());
        assert!(ComparisonDistribution::from_pairs(3, &[(0, 1, -0.2), (0, 2, 1.2)]).is_err());
    }
}
