//! Coverage-penalized reward estimation.
//!
//! The maximum-likelihood estimate is only as trustworthy per arm as the
//! data covering that arm. A regularized comparison Laplacian captures the
//! coverage: well-compared arms sit in stiff directions, rarely compared
//! arms in soft ones. Subtracting a per-arm penalty proportional to the
//! corresponding column norm of the inverse square root of that Laplacian
//! demotes exactly the arms whose estimates rest on thin evidence.

use crate::data::PairwiseDataset;
use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::model::RewardVector;
use crate::train::{fit_mle, PopulationEval, TrainConfig, TrainTrace};

/// Regularized comparison Laplacian: diagonal entries count each arm's
/// comparisons, off-diagonal entries count shared comparisons negatively,
/// all divided by the dataset size, plus `epsilon` on the diagonal.
///
/// Row sums equal `epsilon`, so the matrix is positive definite for any
/// `epsilon > 0` even when the comparison graph is disconnected.
pub fn comparison_laplacian(data: &PairwiseDataset, epsilon: f64) -> Result<SymmetricMatrix> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::config("epsilon must be positive"));
    }
    let k = data.num_arms();
    let n = data.len() as f64;
    let mut entries = vec![0.0; k * k];
    for a in 0..k {
        entries[a * k + a] = data.arm_count(a) as f64 / n + epsilon;
        for b in (a + 1)..k {
            let off = -(data.pair_count(a, b) as f64) / n;
            entries[a * k + b] = off;
            entries[b * k + a] = off;
        }
    }
    SymmetricMatrix::new(k, entries)
}

/// Per-arm pessimism penalties: column norms of the inverse square root of
/// the regularized Laplacian, scaled by `sqrt(1/n)`.
pub fn pessimism_penalties(laplacian: &SymmetricMatrix, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::config("penalty scale requires a nonempty dataset"));
    }
    let root = laplacian.inv_sqrt_psd()?;
    let scale = (1.0 / n as f64).sqrt();
    Ok((0..root.dim())
        .map(|a| {
            let col = root.column(a);
            scale * col.iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect())
}

/// Maximum-likelihood fit followed by per-arm penalty subtraction.
///
/// The returned reward is the penalized estimate, reference-normalized.
/// Trace snapshots are likewise penalized, with both losses recomputed at
/// the penalized rewards, so the trace describes the estimator actually
/// returned rather than the intermediate fit.
pub fn fit_pessimistic_mle(
    data: &PairwiseDataset,
    cfg: &TrainConfig,
    eval: Option<&PopulationEval>,
    epsilon: f64,
) -> Result<(RewardVector, TrainTrace, Vec<f64>)> {
    let laplacian = comparison_laplacian(data, epsilon)?;
    let penalties = pessimism_penalties(&laplacian, data.len())?;
    let (fitted, mut trace) = fit_mle(data, cfg, eval)?;

    let labels = data.labels_f64();
    for rec in &mut trace.records {
        for (r, p) in rec.rewards.iter_mut().zip(&penalties) {
            *r -= p;
        }
        let r = RewardVector::new(rec.rewards.clone())?;
        rec.empirical_loss = crate::loss::empirical_ce_loss(data, &labels, &r)?;
        if let Some(e) = eval {
            rec.population_loss = crate::loss::population_ce_loss(e.r_star, &r, e.weighting)?;
        }
    }

    let penalized: Vec<f64> = fitted
        .values()
        .iter()
        .zip(&penalties)
        .map(|(r, p)| r - p)
        .collect();
    let reward = RewardVector::new(penalized)?.normalized();
    Ok((reward, trace, penalties))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::PairRecord;

    fn ds(num_arms: usize, recs: &[(usize, usize, u8)]) -> PairwiseDataset {
        let records = recs
            .iter()
            .map(|&(a, b, y)| PairRecord { a, a_prime: b, label: y })
            .collect();
        PairwiseDataset::from_records(num_arms, 0, records).unwrap()
    }

    #[test]
    fn two_arm_laplacian_entries() {
        let data = ds(2, &[(0, 1, 1), (0, 1, 1), (0, 1, 0), (0, 1, 1)]);
        let l = comparison_laplacian(&data, 0.01).unwrap();
        assert!((l.get(0, 0) - 1.01).abs() < 1e-15);
        assert!((l.get(1, 1) - 1.01).abs() < 1e-15);
        assert!((l.get(0, 1) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_rows_sum_to_epsilon() {
        let data = ds(3, &[(0, 1, 1), (0, 2, 0), (1, 2, 1), (0, 1, 0)]);
        let l = comparison_laplacian(&data, 0.25).unwrap();
        for a in 0..3 {
            let row: f64 = (0..3).map(|b| l.get(a, b)).sum();
            assert!((row - 0.25).abs() < 1e-12, "row {a} sums to {row}");
        }
    }

    #[test]
    fn two_arm_penalty_closed_form() {
        // eigenvalues eps and 2 + eps with eigenvectors (1,1) and (1,-1):
        // column norm of the inverse root is
        // sqrt(((s + t)/2)^2 + ((s - t)/2)^2) with s = eps^-1/2, t = (2+eps)^-1/2
        let data = ds(2, &[(0, 1, 1), (0, 1, 1), (0, 1, 0), (0, 1, 1)]);
        let l = comparison_laplacian(&data, 0.01).unwrap();
        let pen = pessimism_penalties(&l, data.len()).unwrap();

        let s = 0.01f64.powf(-0.5);
        let t = 2.01f64.powf(-0.5);
        let norm = (((s + t) / 2.0).powi(2) + ((s - t) / 2.0).powi(2)).sqrt();
        let expected = norm * 0.25f64.sqrt();
        assert!((pen[0] - expected).abs() < 1e-9, "{} vs {expected}", pen[0]);
        assert!((pen[0] - 3.544317854640911).abs() < 1e-9);
        assert!((pen[0] - pen[1]).abs() < 1e-12);
    }

    #[test]
    fn sparse_arms_get_larger_penalties() {
        // arm 0 in 10 comparisons, arm 1 in 8, arm 2 in 2
        let mut recs = Vec::new();
        for _ in 0..8 {
            recs.push((0, 1, 1));
        }
        recs.push((0, 2, 0));
        recs.push((0, 2, 0));
        let data = ds(3, &recs);
        let l = comparison_laplacian(&data, 0.01).unwrap();
        let pen = pessimism_penalties(&l, data.len()).unwrap();
        assert!(pen[2] > pen[1] && pen[1] > pen[0], "{pen:?}");
        // numpy cross-check of the full pipeline
        assert!((pen[0] - 1.84426672).abs() < 1e-6);
        assert!((pen[1] - 1.85507729).abs() < 1e-6);
        assert!((pen[2] - 1.88713745).abs() < 1e-6);
    }

    #[test]
    fn more_data_shrinks_penalties() {
        let few = ds(2, &[(0, 1, 1); 4]);
        let many = ds(2, &[(0, 1, 1); 16]);
        let p_few =
            pessimism_penalties(&comparison_laplacian(&few, 0.01).unwrap(), few.len()).unwrap();
        let p_many =
            pessimism_penalties(&comparison_laplacian(&many, 0.01).unwrap(), many.len()).unwrap();
        // normalized counts match, so the penalty scales exactly with 1/sqrt(n)
        assert!((p_many[0] - p_few[0] / 2.0).abs() < 1e-12);
    }

    #[test]
    fn penalized_fit_demotes_thin_arm() {
        // arm 2 wins its single comparison; plain MLE inflates it
        let mut recs = vec![(0, 2, 0)];
        for i in 0..40 {
            recs.push((0, 1, u8::from(i % 2 == 0)));
        }
        let data = ds(3, &recs);
        let cfg = TrainConfig::new(0.5, 0.0, 2_000, 0);
        let (plain, _) = fit_mle(&data, &cfg, None).unwrap();
        let (pess, trace, penalties) = fit_pessimistic_mle(&data, &cfg, None, 0.1).unwrap();
        let plain_gap = plain.values()[2] - plain.values()[0];
        let pess_gap = pess.values()[2] - pess.values()[0];
        assert!(pess_gap < plain_gap, "penalty should demote arm 2");
        assert!(((plain_gap - pess_gap) - (penalties[2] - penalties[0])).abs() < 1e-12);
        // trace snapshots carry the penalty, so final gaps match the estimate
        let last = trace.final_record();
        assert!(((last.rewards[2] - last.rewards[0]) - pess_gap).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_is_still_positive_definite() {
        // arms {0,1} and {2,3} never compared across groups
        let data = ds(4, &[(0, 1, 1), (2, 3, 0)]);
        let l = comparison_laplacian(&data, 0.05).unwrap();
        let pen = pessimism_penalties(&l, data.len()).unwrap();
        assert!(pen.iter().all(|p| p.is_finite() && *p > 0.0));
    }

    #[test]
    fn epsilon_validation() {
        let data = ds(2, &[(0, 1, 1)]);
        assert!(comparison_laplacian(&data, 0.0).is_err());
        assert!(comparison_laplacian(&data, -1.0).is_err());
        assert!(comparison_laplacian(&data, f64::NAN).is_err());
    }
}
