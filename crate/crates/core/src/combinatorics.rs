//! Counting permutations by inversions, Kendall tau balls, and the packing
//! constructions behind the metric-entropy bounds of `(𝔖_n, d_KT)`.

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::perm::{
    enumerate_permutations_capped, kendall_tau, Permutation, DEFAULT_ENUMERATION_CAP,
};

/// Largest `n` for which [`entropy_bounds`] runs the exact greedy check.
pub const EXACT_ENTROPY_MAX_N: usize = 6;

/// Largest half-length `n/2` scanned by [`sparse_vg_code`].
pub const VG_MAX_HALF_LEN: usize = 24;

/// Exact nonnegative integer count.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BigCount(BigUint);

impl BigCount {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// Natural logarithm; `-inf` for zero.
    pub fn ln(&self) -> f64 {
        let bits = self.0.bits();
        if bits == 0 {
            return f64::NEG_INFINITY;
        }
        if bits <= 1000 {
            return self.0.to_f64().expect("fits in f64").ln();
        }
        let shift = bits - 64;
        let top = (&self.0 >> shift).to_f64().expect("64-bit head");
        top.ln() + shift as f64 * std::f64::consts::LN_2
    }

    pub fn to_u128(&self) -> Option<u128> {
        self.0.to_u128()
    }
}

impl From<u64> for BigCount {
    fn from(v: u64) -> Self {
        BigCount(BigUint::from(v))
    }
}

impl From<BigUint> for BigCount {
    fn from(v: BigUint) -> Self {
        BigCount(v)
    }
}

impl fmt::Display for BigCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn max_inversions(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Mahonian row: entry `s` is the number of permutations of `[n]` with
/// exactly `s` inversions, for `s = 0..=k`.
///
/// Inversion tables have independent entries `b_i ∈ {0, …, n−i}`, so the row
/// is built one entry at a time with a sliding-window prefix sum.
fn mahonian_row(n: usize, k: usize) -> Vec<BigUint> {
    let mut row = vec![BigUint::zero(); k + 1];
    row[0] = BigUint::one();
    // width w = n - i + 1 choices for the i-th entry; order of factors is irrelevant
    for width in 1..=n {
        let mut prefix = Vec::with_capacity(k + 2);
        prefix.push(BigUint::zero());
        for v in &row {
            let next = prefix.last().unwrap() + v;
            prefix.push(next);
        }
        for (s, slot) in row.iter_mut().enumerate() {
            let lo = (s + 1).saturating_sub(width);
            *slot = &prefix[s + 1] - &prefix[lo];
        }
    }
    row
}

fn check_k(n: usize, k: u64) -> Result<usize> {
    if n == 0 {
        return Err(Error::out_of_range("n", n, "n >= 1"));
    }
    let max = max_inversions(n);
    if k > max {
        return Err(Error::out_of_range("k", k, format!("0 <= k <= {max}")));
    }
    Ok(k as usize)
}

/// `|{π ∈ 𝔖_n : d_KT(π, id) = k}|`.
pub fn count_exactly_k_inversions(n: usize, k: u64) -> Result<BigCount> {
    let k = check_k(n, k)?;
    Ok(BigCount(mahonian_row(n, k).swap_remove(k)))
}

/// `|{π ∈ 𝔖_n : d_KT(π, id) <= k}|`, exact.
pub fn count_at_most_k_inversions(n: usize, k: u64) -> Result<BigCount> {
    let k = check_k(n, k)?;
    Ok(BigCount(mahonian_row(n, k).into_iter().sum()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub n: usize,
    pub k: u64,
    pub lower_bound: f64,
    pub log_count: f64,
    pub upper_bound: f64,
    pub holds: bool,
}

/// Compares `ln |ℬ(id, k)|` against `n ln(k/n) − n` and `n ln(1 + k/n) + n`.
pub fn check_lemma_inversion_bounds(n: usize, k: u64) -> Result<LemmaReport> {
    if k == 0 {
        return Err(Error::out_of_range("k", k, "k >= 1"));
    }
    let log_count = count_at_most_k_inversions(n, k)?.ln();
    let (nf, kf) = (n as f64, k as f64);
    let lower_bound = nf * (kf / nf).ln() - nf;
    let upper_bound = nf * (1.0 + kf / nf).ln() + nf;
    Ok(LemmaReport {
        n,
        k,
        lower_bound,
        log_count,
        upper_bound,
        holds: lower_bound <= log_count && log_count <= upper_bound,
    })
}

/// Every `σ` with `d_KT(center, σ) <= radius`, in lexicographic order.
pub fn ball_members(
    center: &Permutation,
    radius: u64,
) -> Result<impl Iterator<Item = Permutation> + '_> {
    Ok(
        enumerate_permutations_capped(center.len(), DEFAULT_ENUMERATION_CAP)?
            .filter(move |s| kendall_tau(center, s).expect("same n") <= radius),
    )
}

/// A set of permutations that are pairwise more than `epsilon` apart.
#[derive(Clone, Debug, PartialEq)]
pub struct PackingSet {
    pub n: usize,
    pub epsilon: u64,
    pub members: Vec<Permutation>,
}

impl PackingSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Smallest pairwise distance, `None` for fewer than two members.
    pub fn min_pairwise_distance(&self) -> Option<u64> {
        let mut best = None;
        for (a, x) in self.members.iter().enumerate() {
            for y in &self.members[a + 1..] {
                let d = kendall_tau(x, y).expect("same n");
                best = Some(best.map_or(d, |b: u64| b.min(d)));
            }
        }
        best
    }
}

/// Search space for [`greedy_maximal_packing`].
#[derive(Clone, Debug)]
pub enum Universe {
    All,
    Ball { center: Permutation, radius: u64 },
}

/// Maximal `epsilon`-packing built by a lexicographic greedy scan; by
/// maximality it is also an `epsilon`-net of the universe.
pub fn greedy_maximal_packing(n: usize, epsilon: u64, universe: &Universe) -> Result<PackingSet> {
    let candidates: Box<dyn Iterator<Item = Permutation>> = match universe {
        Universe::All => Box::new(enumerate_permutations_capped(n, DEFAULT_ENUMERATION_CAP)?),
        Universe::Ball { center, radius } => {
            if center.len() != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: center.len(),
                });
            }
            Box::new(ball_members(center, *radius)?)
        }
    };
    let mut members: Vec<Permutation> = Vec::new();
    for cand in candidates {
        if members
            .iter()
            .all(|m| kendall_tau(m, &cand).expect("same n") > epsilon)
        {
            members.push(cand);
        }
    }
    Ok(PackingSet {
        n,
        epsilon,
        members,
    })
}

/// Greedy sparse Varshamov–Gilbert code: vectors of `{0,1}^len` with at most
/// `r` ones, scanned lexicographically and kept when at Hamming distance at
/// least `r/2` from every kept vector. Bit `len-1-i` of a word holds `v(i)`.
pub fn sparse_vg_code(len: usize, r: usize) -> Result<Vec<u64>> {
    if len > VG_MAX_HALF_LEN {
        return Err(Error::out_of_range(
            "n/2",
            len,
            format!("<= {VG_MAX_HALF_LEN} for the exhaustive code scan"),
        ));
    }
    let mut kept: Vec<u64> = Vec::new();
    for word in 0u64..(1u64 << len) {
        if word.count_ones() as usize > r {
            continue;
        }
        if kept
            .iter()
            .all(|&k| 2 * (k ^ word).count_ones() as usize >= r)
        {
            kept.push(word);
        }
    }
    Ok(kept)
}

/// Maps a codeword to the permutation swapping ranks `2i−1, 2i` wherever
/// `v(i) = 1`.
pub fn codeword_permutation(n: usize, word: u64) -> Permutation {
    let half = n / 2;
    let mut image: Vec<usize> = (0..n).collect();
    for i in 0..half {
        if (word >> (half - 1 - i)) & 1 == 1 {
            image.swap(2 * i, 2 * i + 1);
        }
    }
    Permutation::from_image_unchecked(image)
}

/// Packing of `ℬ(id, r)` from the greedy sparse VG code. Members are pairwise
/// at least `⌈r/2⌉` apart, recorded as `epsilon = ⌈r/2⌉ − 1`.
pub fn sparse_vg_packing(n: usize, r: usize) -> Result<PackingSet> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Precondition(format!(
            "sparse VG packing needs even n >= 2, got {n}"
        )));
    }
    if r == 0 || 2 * r >= n {
        return Err(Error::Precondition(format!(
            "sparse VG packing needs 1 <= r < n/2, got r = {r}, n = {n}"
        )));
    }
    let members = sparse_vg_code(n / 2, r)?
        .into_iter()
        .map(|w| codeword_permutation(n, w))
        .collect();
    Ok(PackingSet {
        n,
        epsilon: r.div_ceil(2) as u64 - 1,
        members,
    })
}

/// `exp((r/5) ln(n/r))`, the guaranteed cardinality of the sparse VG packing.
pub fn vg_cardinality_bound(n: usize, r: usize) -> f64 {
    let (nf, rf) = (n as f64, r as f64);
    (rf / 5.0 * (nf / rf).ln()).exp()
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    pub n: usize,
    pub r: u64,
    pub epsilon: u64,
    pub prop_lower: f64,
    pub prop_upper: f64,
    pub greedy_size: Option<usize>,
    pub log_greedy_size: Option<f64>,
    pub holds: Option<bool>,
}

impl EntropyReport {
    pub const CSV_HEADER: &'static str =
        "n,r,epsilon,prop_lower,prop_upper,greedy_size,log_greedy_size,holds";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.n,
            self.r,
            self.epsilon,
            self.prop_lower,
            self.prop_upper,
            opt(self.greedy_size.map(|v| v.to_string())),
            opt(self.log_greedy_size.map(|v| v.to_string())),
            opt(self.holds.map(|v| v.to_string())),
        )
    }
}

/// Closed-form bounds on the `epsilon`-metric entropy of `ℬ(π, r)`:
/// `n ln(r/(n+ε)) − 2n <= ln N <= ln D <= n ln((2n+2r)/ε) + 2n`.
/// For small `n` a greedy maximal packing of the ball, whose size lies between
/// the covering and packing numbers, is checked against both.
pub fn entropy_bounds(n: usize, r: u64, epsilon: u64) -> Result<EntropyReport> {
    if n == 0 {
        return Err(Error::out_of_range("n", n, "n >= 1"));
    }
    let max = max_inversions(n);
    if r == 0 || r > max {
        return Err(Error::out_of_range("r", r, format!("0 < r <= {max}")));
    }
    if epsilon == 0 || epsilon >= r {
        return Err(Error::out_of_range(
            "epsilon",
            epsilon,
            format!("0 < epsilon < r = {r}"),
        ));
    }
    let (nf, rf, ef) = (n as f64, r as f64, epsilon as f64);
    let prop_lower = nf * (rf / (nf + ef)).ln() - 2.0 * nf;
    let prop_upper = nf * ((2.0 * nf + 2.0 * rf) / ef).ln() + 2.0 * nf;
    let mut report = EntropyReport {
        n,
        r,
        epsilon,
        prop_lower,
        prop_upper,
        greedy_size: None,
        log_greedy_size: None,
        holds: None,
    };
    if n <= EXACT_ENTROPY_MAX_N {
        let universe = Universe::Ball {
            center: Permutation::identity(n),
            radius: r,
        };
        let size = greedy_maximal_packing(n, epsilon, &universe)?.len();
        let log_size = (size as f64).ln();
        report.greedy_size = Some(size);
        report.log_greedy_size = Some(log_size);
        report.holds = Some(prop_lower <= log_size && log_size <= prop_upper);
    }
    Ok(report)
}
