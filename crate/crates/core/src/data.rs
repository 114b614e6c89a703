//! Preference datasets: sampling, derived counts, and a line-oriented text
//! format that round-trips exactly.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{btl_prob, is_permutation, ComparisonDistribution, RewardVector};
use crate::rng::{rng_from_seed, GENERATOR_ID};

/// One pairwise comparison: `label = 1` means `a` was preferred over
/// `a_prime`, `label = 0` means the opposite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    pub a: usize,
    pub a_prime: usize,
    pub label: u8,
}

/// A fixed collection of pairwise comparisons over `num_arms` arms.
///
/// Count tables are derived once at construction: `pair_count(a, b)` is the
/// number of comparisons of the unordered pair, `win_count(a, b)` how often
/// `a` beat `b`, and `net_wins(a)` the arm's wins minus losses over the whole
/// dataset.
#[derive(Debug, Clone)]
pub struct PairwiseDataset {
    num_arms: usize,
    seed: u64,
    records: Vec<PairRecord>,
    pair_counts: Vec<u64>,
    win_counts: Vec<u64>,
}

impl PairwiseDataset {
    pub fn from_records(num_arms: usize, seed: u64, records: Vec<PairRecord>) -> Result<Self> {
        if num_arms < 2 {
            return Err(Error::config("need at least 2 arms"));
        }
        if records.is_empty() {
            return Err(Error::config("dataset must contain at least one record"));
        }
        let mut pair_counts = vec![0u64; num_arms * num_arms];
        let mut win_counts = vec![0u64; num_arms * num_arms];
        for rec in &records {
            if rec.a >= num_arms || rec.a_prime >= num_arms {
                return Err(Error::config(format!(
                    "record ({},{}) out of range for {num_arms} arms",
                    rec.a, rec.a_prime
                )));
            }
            if rec.a == rec.a_prime {
                return Err(Error::config("record compares an arm with itself"));
            }
            if rec.label > 1 {
                return Err(Error::config("labels must be 0 or 1"));
            }
            pair_counts[rec.a * num_arms + rec.a_prime] += 1;
            pair_counts[rec.a_prime * num_arms + rec.a] += 1;
            let (w, l) = if rec.label == 1 { (rec.a, rec.a_prime) } else { (rec.a_prime, rec.a) };
            win_counts[w * num_arms + l] += 1;
        }
        Ok(PairwiseDataset { num_arms, seed, records, pair_counts, win_counts })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }

    /// Number of comparisons of the unordered pair {a, b}.
    pub fn pair_count(&self, a: usize, b: usize) -> u64 {
        self.pair_counts[a * self.num_arms + b]
    }

    /// Number of comparisons in which `a` beat `b`.
    pub fn win_count(&self, a: usize, b: usize) -> u64 {
        self.win_counts[a * self.num_arms + b]
    }

    /// Total comparisons involving arm `a`.
    pub fn arm_count(&self, a: usize) -> u64 {
        (0..self.num_arms).map(|b| self.pair_count(a, b)).sum()
    }

    /// Wins minus losses for arm `a`.
    pub fn net_wins(&self, a: usize) -> i64 {
        let wins: u64 = (0..self.num_arms).map(|b| self.win_count(a, b)).sum();
        let losses: u64 = (0..self.num_arms).map(|b| self.win_count(b, a)).sum();
        wins as i64 - losses as i64
    }

    /// Hard labels as floats, the starting point for label smoothing.
    pub fn labels_f64(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.label as f64).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# prefband pairwise dataset v1\n");
        out.push_str(&format!(
            "# arms={} samples={} seed={} rng={}\n",
            self.num_arms,
            self.records.len(),
            self.seed,
            GENERATOR_ID
        ));
        out.push_str("a,a_prime,y\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.a, r.a_prime, r.label));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = parse_header(text, "pairwise")?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line == "a,a_prime,y" {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::config(format!("line {}: expected a,a_prime,y", lineno + 1)));
            }
            let parse = |s: &str| -> Result<usize> {
                s.trim().parse().map_err(|_| Error::config(format!("line {}: bad integer {s:?}", lineno + 1)))
            };
            records.push(PairRecord {
                a: parse(fields[0])?,
                a_prime: parse(fields[1])?,
                label: parse(fields[2])? as u8,
            });
        }
        if records.len() != header.samples {
            return Err(Error::config(format!(
                "header says {} samples, found {}",
                header.samples,
                records.len()
            )));
        }
        Self::from_records(header.arms, header.seed, records)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Draws `n` comparisons: pairs from `mu`, winners from the BTL model at
/// `r_star`. Records store the pair as (smaller arm, larger arm).
pub fn sample_pairwise_dataset(
    mu: &ComparisonDistribution,
    r_star: &RewardVector,
    n: usize,
    seed: u64,
) -> Result<PairwiseDataset> {
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    if mu.num_arms() != r_star.num_arms() {
        return Err(Error::config("distribution and reward dimension mismatch"));
    }
    let support = mu.support();
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = draw_pair(&support, &mut rng);
        let p = btl_prob(r_star, a, b);
        let label = u8::from(rng.gen::<f64>() < p);
        records.push(PairRecord { a, a_prime: b, label });
    }
    PairwiseDataset::from_records(mu.num_arms(), seed, records)
}

fn draw_pair<R: Rng>(support: &[(usize, usize, f64)], rng: &mut R) -> (usize, usize) {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(a, b, m) in support {
        acc += m;
        if u < acc {
            return (a, b);
        }
    }
    let &(a, b, _) = support.last().expect("support is nonempty by construction");
    (a, b)
}

/// One ranked comparison of `actions.len()` distinct arms. `ranking[j]` is
/// the index into `actions` placed at rank `j` (rank 0 most preferred).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiwiseRecord {
    pub actions: Vec<usize>,
    pub ranking: Vec<usize>,
}

/// A collection of M-wise ranking observations with fixed arity.
#[derive(Debug, Clone)]
pub struct MultiwiseDataset {
    num_arms: usize,
    arity: usize,
    seed: u64,
    records: Vec<MultiwiseRecord>,
}

impl MultiwiseDataset {
    pub fn from_records(
        num_arms: usize,
        arity: usize,
        seed: u64,
        records: Vec<MultiwiseRecord>,
    ) -> Result<Self> {
        if arity < 2 {
            return Err(Error::config("arity must be at least 2"));
        }
        if arity > num_arms {
            return Err(Error::config("arity exceeds number of distinct arms"));
        }
        if records.is_empty() {
            return Err(Error::config("dataset must contain at least one record"));
        }
        for rec in &records {
            if rec.actions.len() != arity || rec.ranking.len() != arity {
                return Err(Error::config("record arity mismatch"));
            }
            let mut seen = vec![false; num_arms];
            for &a in &rec.actions {
                if a >= num_arms {
                    return Err(Error::config(format!("action {a} out of range")));
                }
                if seen[a] {
                    return Err(Error::config("actions within a record must be distinct"));
                }
                seen[a] = true;
            }
            if !is_permutation(&rec.ranking, arity) {
                return Err(Error::config("ranking must be a permutation of positions"));
            }
        }
        Ok(MultiwiseDataset { num_arms, arity, seed, records })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn records(&self) -> &[MultiwiseRecord] {
        &self.records
    }

    /// Pairwise view of a 2-wise dataset: winner first, label 1. Comparison
    /// and win counts are preserved exactly.
    pub fn to_pairwise(&self) -> Result<PairwiseDataset> {
        if self.arity != 2 {
            return Err(Error::config("pairwise conversion requires arity 2"));
        }
        let records = self
            .records
            .iter()
            .map(|r| PairRecord {
                a: r.actions[r.ranking[0]],
                a_prime: r.actions[r.ranking[1]],
                label: 1,
            })
            .collect();
        PairwiseDataset::from_records(self.num_arms, self.seed, records)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# prefband multiwise dataset v1\n");
        out.push_str(&format!(
            "# arms={} arity={} samples={} seed={} rng={}\n",
            self.num_arms,
            self.arity,
            self.records.len(),
            self.seed,
            GENERATOR_ID
        ));
        for r in &self.records {
            let actions: Vec<String> = r.actions.iter().map(|a| a.to_string()).collect();
            let ranking: Vec<String> = r.ranking.iter().map(|s| s.to_string()).collect();
            out.push_str(&format!("{}|{}\n", actions.join(","), ranking.join(",")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let header = parse_header(text, "multiwise")?;
        let arity = header
            .arity
            .ok_or_else(|| Error::config("multiwise header is missing arity"))?;
        let mut records = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (left, right) = line
                .split_once('|')
                .ok_or_else(|| Error::config(format!("line {}: expected actions|ranking", lineno + 1)))?;
            let parse_list = |s: &str| -> Result<Vec<usize>> {
                s.split(',')
                    .map(|t| {
                        t.trim()
                            .parse()
                            .map_err(|_| Error::config(format!("line {}: bad integer {t:?}", lineno + 1)))
                    })
                    .collect()
            };
            records.push(MultiwiseRecord { actions: parse_list(left)?, ranking: parse_list(right)? });
        }
        if records.len() != header.samples {
            return Err(Error::config(format!(
                "header says {} samples, found {}",
                header.samples,
                records.len()
            )));
        }
        Self::from_records(header.arms, arity, header.seed, records)
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// Distribution over M-tuples of distinct arms.
#[derive(Debug, Clone)]
pub struct TupleDistribution {
    num_arms: usize,
    arity: usize,
    items: Vec<(Vec<usize>, f64)>,
}

impl TupleDistribution {
    pub fn new(num_arms: usize, items: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::config("tuple distribution must have support"));
        }
        let arity = items[0].0.len();
        if arity < 2 {
            return Err(Error::config("tuples need at least 2 actions"));
        }
        if arity > num_arms {
            return Err(Error::config("tuple arity exceeds number of distinct arms"));
        }
        let mut total = 0.0;
        for (tuple, p) in &items {
            if tuple.len() != arity {
                return Err(Error::config("all tuples must share one arity"));
            }
            let mut seen = vec![false; num_arms];
            for &a in tuple {
                if a >= num_arms {
                    return Err(Error::config(format!("action {a} out of range")));
                }
                if seen[a] {
                    return Err(Error::config("tuple actions must be distinct"));
                }
                seen[a] = true;
            }
            if !(p.is_finite() && *p >= 0.0) {
                return Err(Error::config("tuple masses must be finite and nonnegative"));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("tuple masses sum to {total}, expected 1")));
        }
        Ok(TupleDistribution { num_arms, arity, items })
    }

    /// Uniform over all ascending M-subsets of the arms.
    pub fn uniform(num_arms: usize, arity: usize) -> Result<Self> {
        if arity < 2 || arity > num_arms {
            return Err(Error::config("invalid arity for uniform tuple distribution"));
        }
        let mut tuples = Vec::new();
        let mut current = Vec::with_capacity(arity);
        enumerate_subsets(num_arms, arity, 0, &mut current, &mut tuples);
        let p = 1.0 / tuples.len() as f64;
        Self::new(num_arms, tuples.into_iter().map(|t| (t, p)).collect())
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn arity(&self) -> usize {
        self.arity
    }
}

fn enumerate_subsets(k: usize, m: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == m {
        out.push(current.clone());
        return;
    }
    for a in start..k {
        current.push(a);
        enumerate_subsets(k, m, a + 1, current, out);
        current.pop();
    }
}

/// Draws `n` ranked comparisons: tuples from `mu`, rankings sequentially from
/// the Plackett-Luce model at `r_star`.
pub fn sample_multiwise_dataset(
    mu: &TupleDistribution,
    r_star: &RewardVector,
    n: usize,
    seed: u64,
) -> Result<MultiwiseDataset> {
    if n == 0 {
        return Err(Error::config("sample count must be positive"));
    }
    if mu.num_arms() != r_star.num_arms() {
        return Err(Error::config("distribution and reward dimension mismatch"));
    }
    let mut rng = rng_from_seed(seed);
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = &mu.items[mu.items.len() - 1].0;
        for (tuple, p) in &mu.items {
            acc += p;
            if u < acc {
                chosen = tuple;
                break;
            }
        }
        let ranking = sample_pl_ranking(r_star, chosen, &mut rng);
        records.push(MultiwiseRecord { actions: chosen.clone(), ranking });
    }
    MultiwiseDataset::from_records(mu.num_arms(), mu.arity(), seed, records)
}

/// Sequential Plackett-Luce draw: each rank picks among remaining positions
/// with probability proportional to exp(reward).
fn sample_pl_ranking<R: Rng>(r_star: &RewardVector, actions: &[usize], rng: &mut R) -> Vec<usize> {
    let vals = r_star.values();
    let mut remaining: Vec<usize> = (0..actions.len()).collect();
    let mut ranking = Vec::with_capacity(actions.len());
    while !remaining.is_empty() {
        let max = remaining
            .iter()
            .map(|&pos| vals[actions[pos]])
            .fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = remaining.iter().map(|&pos| (vals[actions[pos]] - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut idx = remaining.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                idx = i;
                break;
            }
        }
        ranking.push(remaining.remove(idx));
    }
    ranking
}

struct Header {
    arms: usize,
    samples: usize,
    seed: u64,
    arity: Option<usize>,
}

fn parse_header(text: &str, expected_kind: &str) -> Result<Header> {
    let mut arms = None;
    let mut samples = None;
    let mut seed = None;
    let mut arity = None;
    let mut kind_ok = false;
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if line.contains(expected_kind) {
            kind_ok = true;
        }
        for token in line.trim_start_matches('#').split_whitespace() {
            if let Some((key, value)) = token.split_once('=') {
                match key {
                    "arms" => arms = value.parse().ok(),
                    "samples" => samples = value.parse().ok(),
                    "seed" => seed = value.parse().ok(),
                    "arity" => arity = value.parse().ok(),
                    _ => {}
                }
            }
        }
    }
    if !kind_ok {
        return Err(Error::config(format!("not a prefband {expected_kind} dataset")));
    }
    match (arms, samples, seed) {
        (Some(arms), Some(samples), Some(seed)) => Ok(Header { arms, samples, seed, arity }),
        _ => Err(Error::config("header must declare arms, samples, and seed")),
    }
}
