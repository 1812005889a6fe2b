//! The noisy sorting model: comparison probability matrices, comparison data,
//! and the two sampling regimes.

mod dataset;
mod sampling;

pub use dataset::{ComparisonDataset, DatasetBuilder, RowIter, SamplingModel, Storage};
pub use sampling::{
    sample_with_replacement, sample_without_replacement, split_with_replacement,
    split_without_replacement, stage_budgets,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::perm::Permutation;
use crate::seed::rng_from_seed;

/// Win probabilities indexed by rank: `get(a, b)` is the probability that the
/// item of (0-indexed) rank `a` beats the item of rank `b`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbabilityMatrix {
    /// `M*_n(λ)`: `1/2 + λ` below the diagonal, `1/2 − λ` above.
    Star { n: usize, lambda: f64 },
    /// Row-major explicit member of `𝓜_n(λ)`.
    Dense {
        n: usize,
        lambda: f64,
        entries: Vec<f64>,
    },
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 0.5 {
        Ok(())
    } else {
        Err(Error::out_of_range("lambda", lambda, "0 < lambda < 1/2"))
    }
}

impl ProbabilityMatrix {
    pub fn star(n: usize, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if n == 0 {
            return Err(Error::out_of_range("n", n, "n >= 1"));
        }
        Ok(ProbabilityMatrix::Star { n, lambda })
    }

    /// Validated explicit matrix (row-major, `n * n` entries).
    pub fn from_entries(n: usize, lambda: f64, entries: Vec<f64>) -> Result<Self> {
        check_lambda(lambda)?;
        validate_membership(n, lambda, &entries)?;
        Ok(ProbabilityMatrix::Dense { n, lambda, entries })
    }

    /// Random member of `𝓜_n(λ)`: for `a > b`, `M[a][b] = 1/2 + λ + U·(1/2 − λ − η)`
    /// with `U ~ Unif[0, 1)`, and `M[b][a] = 1 − M[a][b]`.
    pub fn random_member(n: usize, lambda: f64, eta: f64, seed: u64) -> Result<Self> {
        check_lambda(lambda)?;
        if !(0.0..=0.5 - lambda).contains(&eta) {
            return Err(Error::out_of_range(
                "eta",
                eta,
                format!("0 <= eta <= {}", 0.5 - lambda),
            ));
        }
        let mut rng = rng_from_seed(seed);
        let mut entries = vec![0.5; n * n];
        for a in 0..n {
            for b in 0..a {
                let u: f64 = rng.random();
                let v = 0.5 + lambda + u * (0.5 - lambda - eta);
                entries[a * n + b] = v;
                entries[b * n + a] = 1.0 - v;
            }
        }
        Self::from_entries(n, lambda, entries)
    }

    pub fn n(&self) -> usize {
        match self {
            ProbabilityMatrix::Star { n, .. } | ProbabilityMatrix::Dense { n, .. } => *n,
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            ProbabilityMatrix::Star { lambda, .. } | ProbabilityMatrix::Dense { lambda, .. } => {
                *lambda
            }
        }
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        match self {
            ProbabilityMatrix::Star { lambda, .. } => match a.cmp(&b) {
                std::cmp::Ordering::Greater => 0.5 + lambda,
                std::cmp::Ordering::Less => 0.5 - lambda,
                std::cmp::Ordering::Equal => 0.5,
            },
            ProbabilityMatrix::Dense { n, entries, .. } => entries[a * n + b],
        }
    }

    pub fn to_entries(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n);
        for a in 0..n {
            for b in 0..n {
                out.push(self.get(a, b));
            }
        }
        out
    }
}

/// Checks `M ∈ 𝓜_n(λ)` together with `M[j][i] = 1 − M[i][j]`.
pub fn validate_membership(n: usize, lambda: f64, entries: &[f64]) -> Result<()> {
    if entries.len() != n * n {
        return Err(Error::DimensionMismatch {
            left: n * n,
            right: entries.len(),
        });
    }
    const TOL: f64 = 1e-12;
    for a in 0..n {
        for b in 0..n {
            let v = entries[a * n + b];
            let bad = |why: &str| {
                Err(Error::Precondition(format!(
                    "M[{}][{}] = {v} violates {why}",
                    a + 1,
                    b + 1
                )))
            };
            if !(0.0..=1.0).contains(&v) {
                return bad("0 <= M <= 1");
            }
            if a == b && (v - 0.5).abs() > TOL {
                return bad("M[i][i] = 1/2");
            }
            if a > b && v < 0.5 + lambda - TOL {
                return bad("M[i][j] >= 1/2 + lambda for i > j");
            }
            if a < b && v > 0.5 - lambda + TOL {
                return bad("M[i][j] <= 1/2 - lambda for i < j");
            }
            if (v + entries[b * n + a] - 1.0).abs() > TOL && a != b {
                return bad("M[j][i] = 1 - M[i][j]");
            }
        }
    }
    Ok(())
}

/// Expected number of wins per comparison-slot: `s*_r = Σ_{q≠r} M[r][q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueScores {
    by_rank: Vec<f64>,
    ranks: Permutation,
}

impl TrueScores {
    pub fn by_rank(&self) -> &[f64] {
        &self.by_rank
    }

    pub fn of_item(&self, item: usize) -> f64 {
        self.by_rank[self.ranks.rank(item)]
    }
}

pub fn true_scores(pi_star: &Permutation, m: &ProbabilityMatrix) -> Result<TrueScores> {
    let n = m.n();
    crate::error::ensure_same_len(n, pi_star.len())?;
    let by_rank = (0..n)
        .map(|a| (0..n).filter(|&b| b != a).map(|b| m.get(a, b)).sum())
        .collect();
    Ok(TrueScores {
        by_rank,
        ranks: pi_star.clone(),
    })
}

/// `λ(2i − n − 1) + (n − 1)/2` for the 1-indexed rank `i` under `M*_n(λ)`.
pub fn star_score(n: usize, lambda: f64, rank_one_based: usize) -> f64 {
    lambda * (2.0 * rank_one_based as f64 - n as f64 - 1.0) + (n as f64 - 1.0) / 2.0
}
