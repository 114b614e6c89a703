//! Cross-entropy losses over preference data and their exact gradients.

use crate::data::PairwiseDataset;
use crate::error::{Error, Result};
use crate::model::{btl_prob, ComparisonDistribution, RewardVector};

/// Probabilities are clamped to this range inside logarithms only, so a
/// saturated model yields a large finite loss instead of infinity. Gradients
/// use the unclamped probabilities.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross entropy of predicting `p` against a (possibly soft) label `y`.
pub(crate) fn soft_bce(p: f64, y: f64) -> f64 {
    let p_clamped = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    let q_clamped = (1.0 - p).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    -(y * p_clamped.ln() + (1.0 - y) * q_clamped.ln())
}

fn check_labels(data: &PairwiseDataset, labels: &[f64]) -> Result<()> {
    if labels.len() != data.len() {
        return Err(Error::config(format!(
            "{} labels for {} records",
            labels.len(),
            data.len()
        )));
    }
    if labels.iter().any(|y| !(0.0..=1.0).contains(y)) {
        return Err(Error::config("labels must lie in [0, 1]"));
    }
    Ok(())
}

/// Mean cross entropy of the BTL model at `r` against per-record labels.
pub fn empirical_ce_loss(data: &PairwiseDataset, labels: &[f64], r: &RewardVector) -> Result<f64> {
    check_labels(data, labels)?;
    if r.num_arms() != data.num_arms() {
        return Err(Error::config("reward and dataset dimension mismatch"));
    }
    let mut acc = 0.0;
    for (rec, &y) in data.records().iter().zip(labels) {
        let p = btl_prob(r, rec.a, rec.a_prime);
        acc += soft_bce(p, y);
    }
    Ok(acc / data.len() as f64)
}

/// Exact gradient of [`empirical_ce_loss`] with respect to the rewards.
///
/// Record i with pair (a, b) and label y contributes (p_i - y)/n to arm a and
/// the negation to arm b, so components always sum to zero. At r = 0 this
/// reduces to -(net wins of the arm)/(2n).
pub fn empirical_ce_gradient(data: &PairwiseDataset, labels: &[f64], r: &RewardVector) -> Result<Vec<f64>> {
    check_labels(data, labels)?;
    if r.num_arms() != data.num_arms() {
        return Err(Error::config("reward and dataset dimension mismatch"));
    }
    let n = data.len() as f64;
    let mut grad = vec![0.0; r.num_arms()];
    for (rec, &y) in data.records().iter().zip(labels) {
        let p = btl_prob(r, rec.a, rec.a_prime);
        let g = (p - y) / n;
        grad[rec.a] += g;
        grad[rec.a_prime] -= g;
    }
    Ok(grad)
}

/// Pair weighting for population-level losses.
#[derive(Debug, Clone, Copy)]
pub enum PairWeighting<'a> {
    /// Every unordered pair weighted equally.
    UniformPairs,
    /// Pairs weighted by a sampling distribution.
    Mu(&'a ComparisonDistribution),
}

/// Expected cross entropy of the BTL model at `r` against ground-truth
/// preference probabilities from `r_star`, averaged over pairs.
///
/// This is the quantity that keeps growing when an estimate drives some
/// pairwise difference to infinity: every pair has a true probability
/// strictly inside (0, 1), so saturated predictions are punished without
/// bound.
pub fn population_ce_loss(r_star: &RewardVector, r: &RewardVector, weighting: PairWeighting) -> Result<f64> {
    let k = r_star.num_arms();
    if r.num_arms() != k {
        return Err(Error::config("reward dimension mismatch"));
    }
    let mut acc = 0.0;
    let mut weight_total = 0.0;
    for a in 0..k {
        for b in (a + 1)..k {
            let w = match weighting {
                PairWeighting::UniformPairs => 1.0,
                PairWeighting::Mu(mu) => {
                    if mu.num_arms() != k {
                        return Err(Error::config("weighting dimension mismatch"));
                    }
                    mu.mass(a, b)
                }
            };
            if w == 0.0 {
                continue;
            }
            let p_true = btl_prob(r_star, a, b);
            let p_model = btl_prob(r, a, b);
            acc += w * soft_bce(p_model, p_true);
            weight_total += w;
        }
    }
    if weight_total == 0.0 {
        return Err(Error::config("pair weighting has empty support"));
    }
    Ok(acc / weight_total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PairRecord;
    use crate::model::hard_instance;

    fn rv(values: &[f64]) -> RewardVector {
        RewardVector::new(values.to_vec()).unwrap()
    }

    fn ds(num_arms: usize, recs: &[(usize, usize, u8)]) -> PairwiseDataset {
        let records = recs
            .iter()
            .map(|&(a, b, y)| PairRecord { a, a_prime: b, label: y })
            .collect();
        PairwiseDataset::from_records(num_arms, 0, records).unwrap()
    }

    #[test]
    fn loss_at_zero_rewards_is_ln2() {
        let data = ds(3, &[(0, 1, 1), (0, 2, 0), (1, 2, 1)]);
        let loss = empirical_ce_loss(&data, &data.labels_f64(), &rv(&[0.0; 3])).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_single_record_hand_value() {
        // p = sigmoid(ln 3) = 3/4, loss = -ln(3/4)
        let data = ds(2, &[(0, 1, 1)]);
        let loss = empirical_ce_loss(&data, &[1.0], &rv(&[3.0f64.ln(), 0.0])).unwrap();
        assert!((loss - 0.2876820724517809).abs() < 1e-15);
    }

    #[test]
    fn half_labels_give_ln2_at_any_symmetric_point() {
        let data = ds(2, &[(0, 1, 1), (0, 1, 0)]);
        let loss = empirical_ce_loss(&data, &[0.5, 0.5], &rv(&[0.0, 0.0])).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn loss_is_shift_invariant() {
        let data = ds(3, &[(0, 1, 1), (1, 2, 0), (0, 2, 1)]);
        let labels = data.labels_f64();
        let a = empirical_ce_loss(&data, &labels, &rv(&[0.4, -0.2, 0.9])).unwrap();
        let b = empirical_ce_loss(&data, &labels, &rv(&[0.4 + 7.0, -0.2 + 7.0, 0.9 + 7.0])).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn saturated_model_finite_loss() {
        let data = ds(2, &[(0, 1, 0)]);
        let loss = empirical_ce_loss(&data, &[0.0], &rv(&[800.0, -800.0])).unwrap();
        assert!(loss.is_finite());
        assert!(loss > 20.0);
    }

    #[test]
    fn gradient_at_zero_matches_net_win_formula() {
        let data = ds(3, &[(0, 1, 1), (0, 1, 1), (0, 2, 0), (1, 2, 1)]);
        let grad = empirical_ce_gradient(&data, &data.labels_f64(), &rv(&[0.0; 3])).unwrap();
        let n = data.len() as f64;
        for a in 0..3 {
            let expected = -(data.net_wins(a) as f64) / (2.0 * n);
            assert!((grad[a] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_components_sum_to_zero() {
        let data = ds(4, &[(0, 1, 1), (2, 3, 0), (1, 2, 1), (0, 3, 0)]);
        let grad = empirical_ce_gradient(&data, &data.labels_f64(), &rv(&[0.3, -0.1, 0.7, 0.0])).unwrap();
        let total: f64 = grad.iter().sum();
        assert!(total.abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::rng_from_seed(13);
        for _ in 0..100 {
            let k = rng.gen_range(2..6);
            let n = rng.gen_range(1..20);
            let mut recs = Vec::new();
            for _ in 0..n {
                let a = rng.gen_range(0..k);
                let mut b = rng.gen_range(0..k);
                while b == a {
                    b = rng.gen_range(0..k);
                }
                recs.push((a, b, u8::from(rng.gen::<bool>())));
            }
            let data = ds(k, &recs);
            let labels: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let point: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r = rv(&point);
            let grad = empirical_ce_gradient(&data, &labels, &r).unwrap();
            let h = 1e-5;
            for a in 0..k {
                let mut hi = point.clone();
                let mut lo = point.clone();
                hi[a] += h;
                lo[a] -= h;
                let fd = (empirical_ce_loss(&data, &labels, &rv(&hi)).unwrap()
                    - empirical_ce_loss(&data, &labels, &rv(&lo)).unwrap())
                    / (2.0 * h);
                let scale = grad[a].abs().max(fd.abs()).max(1e-3);
                assert!(
                    (grad[a] - fd).abs() / scale < 1e-6,
                    "arm {a}: analytic {} vs fd {fd}",
                    grad[a]
                );
            }
        }
    }

    #[test]
    fn population_loss_at_truth_hand_value() {
        // K=3, r* = (1,0,0), uniform pairs: mean of H(s(1)), H(s(1)), H(1/2)
        let (r_star, _) = hard_instance(3, 500).unwrap();
        let p = 0.7310585786300049f64;
        let h = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln());
        let expected = (2.0 * h + std::f64::consts::LN_2) / 3.0;
        let loss = population_ce_loss(&r_star, &r_star, PairWeighting::UniformPairs).unwrap();
        assert!((loss - expected).abs() < 1e-15);
        assert!((loss - 0.6192).abs() < 1e-4);
    }

    #[test]
    fn population_loss_minimized_at_truth() {
        let (r_star, mu) = hard_instance(3, 500).unwrap();
        for weighting in [PairWeighting::UniformPairs, PairWeighting::Mu(&mu)] {
            let base = population_ce_loss(&r_star, &r_star, weighting).unwrap();
            for a in 0..3 {
                for delta in [-0.05, 0.05] {
                    let mut v = r_star.values().to_vec();
                    v[a] += delta;
                    let perturbed = population_ce_loss(&r_star, &rv(&v), weighting).unwrap();
                    assert!(perturbed >= base - 1e-12);
                }
            }
        }
    }

    #[test]
    fn population_loss_grows_with_divergence() {
        let (r_star, _) = hard_instance(3, 500).unwrap();
        let mut prev = 0.0;
        for (i, s) in [1.0, 5.0, 20.0].iter().enumerate() {
            let loss =
                population_ce_loss(&r_star, &rv(&[1.0, 0.0, *s]), PairWeighting::UniformPairs).unwrap();
            if i > 0 {
                assert!(loss > prev);
            }
            prev = loss;
        }
        // slope approaches the mean true-probability weight once the wrong
        // pairs saturate (but before the probability floor clamps the log)
        let l1 = population_ce_loss(&r_star, &rv(&[1.0, 0.0, 15.0]), PairWeighting::UniformPairs).unwrap();
        let l2 = population_ce_loss(&r_star, &rv(&[1.0, 0.0, 16.0]), PairWeighting::UniformPairs).unwrap();
        let slope = l2 - l1;
        let expected = (crate::model::sigmoid(1.0) + 0.5) / 3.0;
        assert!((slope - expected).abs() < 1e-3, "slope {slope} vs {expected}");
    }

    #[test]
    fn label_validation() {
        let data = ds(2, &[(0, 1, 1)]);
        assert!(empirical_ce_loss(&data, &[1.5], &rv(&[0.0, 0.0])).is_err());
        assert!(empirical_ce_loss(&data, &[0.5, 0.5], &rv(&[0.0, 0.0])).is_err());
    }
}
