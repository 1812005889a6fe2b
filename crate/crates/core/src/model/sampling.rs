use rand::Rng;

use super::dataset::{ComparisonDataset, DatasetBuilder, SamplingModel, Storage};
use super::ProbabilityMatrix;
use crate::error::{ensure_same_len, Error, Result};
use crate::perm::Permutation;
use crate::seed::{derive_seed, rng_from_seed};

/// Model O₁: every unordered pair is compared once with probability `p`;
/// item `i` then beats `j` with probability `M[π*(i)][π*(j)]`.
pub fn sample_without_replacement(
    pi_star: &Permutation,
    m: &ProbabilityMatrix,
    p: f64,
    seed: u64,
) -> Result<ComparisonDataset> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::out_of_range("p", p, "0 < p <= 1"));
    }
    let n = pi_star.len();
    ensure_same_len(n, m.n())?;
    let pairs = (n * n.saturating_sub(1) / 2) as f64;
    let mut b = DatasetBuilder::new(n, (p * pairs).ceil() as u64);
    let mut rng = rng_from_seed(seed);
    for i in 0..n {
        let ri = pi_star.rank(i);
        for j in i + 1..n {
            if p < 1.0 && rng.random::<f64>() >= p {
                continue;
            }
            if rng.random::<f64>() < m.get(ri, pi_star.rank(j)) {
                b.record(i, j);
            } else {
                b.record(j, i);
            }
        }
    }
    Ok(b.build(SamplingModel::WithoutReplacement { p }, seed))
}

/// Model O₂: `budget` uniformly random pairs, drawn independently with
/// replacement, each followed by one comparison.
pub fn sample_with_replacement(
    pi_star: &Permutation,
    m: &ProbabilityMatrix,
    budget: u64,
    seed: u64,
) -> Result<ComparisonDataset> {
    let n = pi_star.len();
    ensure_same_len(n, m.n())?;
    if budget == 0 {
        return Err(Error::out_of_range("N", budget, "N >= 1"));
    }
    if n < 2 {
        return Err(Error::out_of_range("n", n, "n >= 2 to draw pairs"));
    }
    if budget > u32::MAX as u64 {
        return Err(Error::out_of_range(
            "N",
            budget,
            format!("N <= {}", u32::MAX),
        ));
    }
    let mut b = DatasetBuilder::new(n, budget);
    let mut rng = rng_from_seed(seed);
    for _ in 0..budget {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if rng.random::<f64>() < m.get(pi_star.rank(i), pi_star.rank(j)) {
            b.record(i, j);
        } else {
            b.record(j, i);
        }
    }
    Ok(b.build(SamplingModel::WithReplacement { budget }, seed))
}

/// `total` split into `parts` budgets, the remainder going one apiece to the
/// leading parts.
pub fn stage_budgets(total: u64, parts: usize) -> Vec<u64> {
    let parts_u = parts as u64;
    let (q, r) = (total / parts_u, total % parts_u);
    (0..parts_u).map(|k| q + u64::from(k < r)).collect()
}

/// Independent O₂ datasets sharing `π*` and `M`, one per entry of `budgets`.
/// Dataset `k` uses seed `derive_seed(master_seed, k)`.
pub fn split_with_replacement(
    pi_star: &Permutation,
    m: &ProbabilityMatrix,
    total: u64,
    budgets: &[u64],
    master_seed: u64,
) -> Result<Vec<ComparisonDataset>> {
    let sum: u64 = budgets.iter().sum();
    if sum != total || budgets.is_empty() {
        return Err(Error::Precondition(format!(
            "budgets sum to {sum}, expected total {total}"
        )));
    }
    budgets
        .iter()
        .enumerate()
        .map(|(k, &b)| sample_with_replacement(pi_star, m, b, derive_seed(master_seed, k as u64)))
        .collect()
}

/// Sends each observed comparison to one of `parts` buckets uniformly at
/// random, independently of all others.
pub fn split_without_replacement(
    dataset: &ComparisonDataset,
    parts: usize,
    seed: u64,
) -> Result<Vec<ComparisonDataset>> {
    if parts == 0 {
        return Err(Error::out_of_range("T", parts, "T >= 1"));
    }
    let n = dataset.n();
    let expected = dataset.total_comparisons() / parts as u64;
    let storage = if dataset.storage() == Storage::Sparse {
        Storage::Sparse
    } else {
        Storage::for_budget(n, expected)
    };
    let mut builders: Vec<_> = (0..parts)
        .map(|_| DatasetBuilder::with_storage(n, storage))
        .collect();
    let mut rng = rng_from_seed(seed);
    for i in 0..n {
        for (j, a, _) in dataset.row(i) {
            if parts == 1 {
                builders[0].add_wins(i, j, a);
                continue;
            }
            for _ in 0..a {
                builders[rng.random_range(0..parts)].record(i, j);
            }
        }
    }
    Ok(builders
        .into_iter()
        .enumerate()
        .map(|(k, b)| {
            let seed_k = derive_seed(seed, k as u64);
            let mut ds = b.build(dataset.model(), seed_k);
            let model = match dataset.model() {
                SamplingModel::WithoutReplacement { p } => SamplingModel::WithoutReplacement {
                    p: p / parts as f64,
                },
                SamplingModel::WithReplacement { .. } => SamplingModel::WithReplacement {
                    budget: ds.total_comparisons(),
                },
            };
            ds.set_model(model);
            ds
        })
        .collect())
}
