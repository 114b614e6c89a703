//! Randomized invariants of the comparison model, the policies, the
//! smoothing fits, and the serialization formats. Case counts are kept low
//! enough for the slower fitting properties to run in a debug build.

use proptest::prelude::*;

use prefband::data::{PairRecord, PairwiseDataset};
use prefband::model::{btl_prob, pl_permutation_prob, RewardVector};
use prefband::pessimism::{comparison_laplacian, pessimism_penalties};
use prefband::policy::{
    closed_form_policy, expected_true_reward, kl_closed_form, kl_reward_curve, PolicyVector,
};
use prefband::train::{fit_ids, fit_mle, BatchSchedule, TrainConfig};

fn reward_values(num_arms: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, num_arms)
}

fn random_dataset(num_arms: usize) -> impl Strategy<Value = PairwiseDataset> {
    // every unordered pair appears once so the comparison graph stays
    // connected, then extra random records are stacked on top
    let base: Vec<(usize, usize)> =
        (0..num_arms).flat_map(|a| (a + 1..num_arms).map(move |b| (a, b))).collect();
    let extra = prop::collection::vec(
        (0..num_arms, 0..num_arms, prop::bool::ANY).prop_filter("distinct arms", |(a, b, _)| a != b),
        0..20,
    );
    (prop::collection::vec(prop::bool::ANY, base.len()), extra).prop_map(
        move |(base_labels, extra)| {
            let mut records: Vec<PairRecord> = base
                .iter()
                .zip(base_labels)
                .map(|(&(a, a_prime), label)| PairRecord { a, a_prime, label: u8::from(label) })
                .collect();
            records.extend(
                extra
                    .into_iter()
                    .map(|(a, a_prime, label)| PairRecord { a, a_prime, label: u8::from(label) }),
            );
            PairwiseDataset::from_records(num_arms, 0, records).expect("valid records")
        },
    )
}

fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn rec(pool: &mut Vec<usize>, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pool.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..pool.len() {
            let v = pool.remove(i);
            prefix.push(v);
            rec(pool, prefix, out);
            prefix.pop();
            pool.insert(i, v);
        }
    }
    let mut out = Vec::new();
    rec(&mut (0..m).collect(), &mut Vec::new(), &mut out);
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn btl_probabilities_complement_and_shift(
        values in reward_values(5),
        shift in -10.0..10.0f64,
        a in 0usize..5,
        b in 0usize..5,
    ) {
        prop_assume!(a != b);
        let r = RewardVector::new(values.clone()).unwrap();
        let p = btl_prob(&r, a, b);
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + btl_prob(&r, b, a) - 1.0).abs() < 1e-12);

        let shifted = RewardVector::new(values.iter().map(|v| v + shift).collect()).unwrap();
        prop_assert!((btl_prob(&shifted, a, b) - p).abs() < 1e-9);
    }

    #[test]
    fn ranking_probabilities_normalize(values in reward_values(4)) {
        let r = RewardVector::new(values).unwrap();
        let actions = [0usize, 1, 2, 3];
        let total: f64 = permutations(4)
            .iter()
            .map(|sigma| pl_permutation_prob(&r, &actions, sigma).unwrap())
            .sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn tilted_policies_are_valid_and_consistent(
        values in reward_values(4),
        lambda in 0.0..50.0f64,
    ) {
        let r = RewardVector::new(values).unwrap();
        let pi0 = PolicyVector::uniform(4).unwrap();
        let policy = closed_form_policy(&r, &pi0, lambda).unwrap();

        let sum: f64 = policy.probs().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(policy.probs().iter().all(|p| *p >= 0.0));

        let kl = kl_closed_form(&r, &pi0, lambda).unwrap();
        prop_assert!(kl >= 0.0);

        // the tilted policy cannot earn less proxy reward than its reference
        let proxy_ref = expected_true_reward(&pi0, &r).unwrap();
        let proxy_tilted = expected_true_reward(&policy, &r).unwrap();
        prop_assert!(proxy_tilted >= proxy_ref - 1e-9);
    }

    #[test]
    fn proxy_reward_is_monotone_along_the_curve(values in reward_values(5)) {
        let r_hat = RewardVector::new(values.clone()).unwrap();
        let r_star = RewardVector::new(values.iter().rev().cloned().collect()).unwrap();
        let pi0 = PolicyVector::uniform(5).unwrap();
        let grid = [0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0];
        let curve = kl_reward_curve(&r_hat, &r_star, &pi0, &grid).unwrap();
        for pair in curve.windows(2) {
            prop_assert!(pair[1].proxy_reward >= pair[0].proxy_reward - 1e-9);
            prop_assert!(pair[1].kl >= pair[0].kl - 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn smoothed_labels_stay_in_the_unit_interval(
        data in random_dataset(4),
        beta in 0.001..1.0f64,
    ) {
        let mut cfg = TrainConfig::new(0.2, beta, 30, 1);
        cfg.batch = BatchSchedule::Minibatch(3);
        cfg.convergence_tol = 0.0;
        let (_, trace, labels) = fit_ids(&data, &cfg, None).unwrap();
        prop_assert!(labels.labels.iter().all(|y| (0.0..=1.0).contains(y)));
        prop_assert!(trace.records.iter().all(|rec| rec.empirical_loss.is_finite()));
    }

    #[test]
    fn penalties_are_nonnegative_and_shrink_with_coverage(
        data in random_dataset(4),
        epsilon in 0.001..0.5f64,
    ) {
        let n = data.len();
        let laplacian = comparison_laplacian(&data, epsilon).unwrap();
        let penalties = pessimism_penalties(&laplacian, n).unwrap();
        prop_assert_eq!(penalties.len(), 4);
        prop_assert!(penalties.iter().all(|p| p.is_finite() && *p >= 0.0));

        // doubling every record halves 1/n and cannot raise any penalty
        let mut doubled = data.records().to_vec();
        doubled.extend_from_slice(data.records());
        let dense = PairwiseDataset::from_records(4, 0, doubled).unwrap();
        let dense_penalties =
            pessimism_penalties(&comparison_laplacian(&dense, epsilon).unwrap(), 2 * n).unwrap();
        for (thin, fat) in penalties.iter().zip(&dense_penalties) {
            prop_assert!(fat <= thin);
        }
    }

    #[test]
    fn two_arm_mle_recovers_empirical_log_odds(wins in 1u32..6, losses in 1u32..6) {
        let mut records = Vec::new();
        for _ in 0..wins {
            records.push(PairRecord { a: 0, a_prime: 1, label: 1 });
        }
        for _ in 0..losses {
            records.push(PairRecord { a: 0, a_prime: 1, label: 0 });
        }
        let data = PairwiseDataset::from_records(2, 0, records).unwrap();

        let mut cfg = TrainConfig::new(1.0, 0.0, 5000, 0);
        cfg.batch = BatchSchedule::Full;
        cfg.convergence_tol = 1e-10;
        let (reward, _) = fit_mle(&data, &cfg, None).unwrap();

        let fitted_gap = reward.values()[0] - reward.values()[1];
        let oracle = (wins as f64 / losses as f64).ln();
        prop_assert!((fitted_gap - oracle).abs() < 1e-3, "{fitted_gap} vs {oracle}");
    }

    #[test]
    fn dataset_text_round_trips(data in random_dataset(5)) {
        let text = data.to_text();
        let back = PairwiseDataset::from_text(&text).unwrap();
        prop_assert_eq!(back.num_arms(), data.num_arms());
        prop_assert_eq!(back.records(), data.records());
        prop_assert_eq!(back.to_text(), text);
    }
}
