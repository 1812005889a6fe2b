use crate::error::{Error, Result};
use crate::model::ComparisonDataset;
use crate::perm::Permutation;

/// Lower clamp for `λ̂`; the upper clamp is `1/2 − LAMBDA_CLAMP`.
pub const LAMBDA_CLAMP: f64 = 1e-6;

/// Ranks items by total wins `S_i = Σ_j A_ij`, ties broken by ascending index.
pub fn borda_sort(dataset: &ComparisonDataset) -> Permutation {
    let totals = dataset.win_totals();
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by_key(|&i| (totals[i], i));
    let mut image = vec![0; totals.len()];
    for (rank, item) in order.into_iter().enumerate() {
        image[item] = rank;
    }
    Permutation::from_image_unchecked(image)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaEstimate {
    /// Clamped estimate in `(0, 1/2)`.
    pub lambda_hat: f64,
    /// Unclamped value of the rescaled win average.
    pub raw: f64,
    /// Borda ranking of the first subsample.
    pub pilot: Permutation,
    /// Number of ordered pairs whose pilot rank gap exceeds `n/2`.
    pub pair_count: u64,
    /// Wins of the higher-ranked item over those pairs in the second subsample.
    pub win_sum: u64,
}

/// Estimates `λ` from two independent with-replacement subsamples.
///
/// Items are ranked by Borda score on `pilot`; over the ordered pairs `(i, j)`
/// whose pilot ranks differ by more than `n/2`, the wins `A″_ij` in `holdout`
/// are averaged and rescaled so that the expectation is `1/2 + λ` when the
/// pilot order is correct on those pairs.
pub fn estimate_lambda(
    pilot: &ComparisonDataset,
    holdout: &ComparisonDataset,
) -> Result<LambdaEstimate> {
    let n = pilot.n();
    crate::error::ensure_same_len(n, holdout.n())?;
    if n < 4 {
        return Err(Error::out_of_range("n", n, "n >= 4 for lambda estimation"));
    }
    let budget = holdout.total_comparisons();
    if budget == 0 {
        return Err(Error::Precondition(
            "holdout sample has no comparisons".into(),
        ));
    }
    let ranks = borda_sort(pilot);
    let half = n / 2;
    let mut win_sum = 0u64;
    for i in 0..n {
        let ri = ranks.rank(i);
        if ri <= half {
            continue;
        }
        for (j, a, _) in holdout.row(i) {
            if ri - half > ranks.rank(j) {
                win_sum += a as u64;
            }
        }
    }
    // pairs with rank gap > n/2 in a bijection: C(n - ⌊n/2⌋, 2)
    let m = (n - half) as u64;
    let pair_count = m * (m - 1) / 2;
    let pairs = (n as u64 * (n as u64 - 1) / 2) as f64;
    let raw = pairs / (budget as f64 * pair_count as f64) * win_sum as f64 - 0.5;
    Ok(LambdaEstimate {
        lambda_hat: raw.clamp(LAMBDA_CLAMP, 0.5 - LAMBDA_CLAMP),
        raw,
        pilot: ranks,
        pair_count,
        win_sum,
    })
}
