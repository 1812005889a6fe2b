//! Permutations of `[n]`, the Kendall tau / footrule / max-displacement
//! distances, inversion tables, and lexicographic enumeration.
//!
//! A [`Permutation`] maps item `i` to its rank `π(i)`, ordering items from
//! weakest (rank 1) to strongest (rank n). Text forms and the `*_one_based`
//! constructors speak 1-indexed ranks; the slice accessors are 0-indexed.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{ensure_same_len, Error, Result};

/// Largest `n` that [`enumerate_permutations`] agrees to walk (10! ≈ 3.6M).
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

/// A bijection on `{0, …, n-1}` stored as `image[i] = π(i)`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Permutation {
    image: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation {
            image: (0..n).collect(),
        }
    }

    pub fn reverse(n: usize) -> Self {
        Permutation {
            image: (0..n).rev().collect(),
        }
    }

    /// Builds from 0-indexed images, validating bijectivity.
    pub fn from_zero_based(image: Vec<usize>) -> Result<Self> {
        let n = image.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("empty permutation".into()));
        }
        let mut seen = vec![false; n];
        for (i, &v) in image.iter().enumerate() {
            if v >= n {
                return Err(Error::InvalidPermutation(format!(
                    "value at position {} is out of range for n = {n}",
                    i + 1
                )));
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidPermutation(format!(
                    "value {} appears more than once",
                    v + 1
                )));
            }
        }
        Ok(Permutation { image })
    }

    /// Builds from 1-indexed images such as `[2, 1, 3]`.
    pub fn from_one_based(values: &[usize]) -> Result<Self> {
        let image = values
            .iter()
            .map(|&v| {
                v.checked_sub(1)
                    .ok_or_else(|| Error::InvalidPermutation("value 0 in 1-indexed input".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_zero_based(image)
    }

    pub(crate) fn from_image_unchecked(image: Vec<usize>) -> Self {
        debug_assert!(Self::from_zero_based(image.clone()).is_ok());
        Permutation { image }
    }

    /// Uniformly random permutation.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut image: Vec<usize> = (0..n).collect();
        image.shuffle(rng);
        Permutation { image }
    }

    /// Permutation ranking items by ascending score, ties broken by ascending
    /// item index.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut image = vec![0; scores.len()];
        for (rank, item) in order.into_iter().enumerate() {
            image[item] = rank;
        }
        Permutation { image }
    }

    pub fn len(&self) -> usize {
        self.image.len()
    }

    pub fn is_empty(&self) -> bool {
        self.image.is_empty()
    }

    /// 0-indexed rank of 0-indexed item `i`.
    #[inline]
    pub fn rank(&self, i: usize) -> usize {
        self.image[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.image
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.image.iter().map(|v| v + 1).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.image.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &v) in self.image.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { image: inv }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        ensure_same_len(self.len(), other.len())?;
        Ok(Permutation {
            image: other.image.iter().map(|&j| self.image[j]).collect(),
        })
    }
}

impl fmt::Debug for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Permutation({self})")
    }
}

/// Space-separated 1-indexed images.
impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.image.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", v + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Permutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let values = s
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>().map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad permutation entry {tok:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Permutation::from_one_based(&values)
    }
}

pub fn compose(pi: &Permutation, sigma: &Permutation) -> Result<Permutation> {
    pi.compose(sigma)
}

pub fn invert(pi: &Permutation) -> Permutation {
    pi.inverse()
}

/// Swap of the adjacent ranks `k` and `k + 1` (1-indexed, `1 <= k < n`).
pub fn adjacent_transposition(n: usize, k: usize) -> Result<Permutation> {
    if k == 0 || k >= n {
        return Err(Error::out_of_range("k", k, format!("1 <= k < {n}")));
    }
    let mut image: Vec<usize> = (0..n).collect();
    image.swap(k - 1, k);
    Ok(Permutation { image })
}

/// Number of discordant pairs between `pi` and `sigma`, `O(n log n)`.
///
/// Items are laid out in `sigma` order and the inversions of the resulting
/// `pi`-rank sequence are counted by merge sort.
pub fn kendall_tau(pi: &Permutation, sigma: &Permutation) -> Result<u64> {
    ensure_same_len(pi.len(), sigma.len())?;
    let mut seq = vec![0usize; pi.len()];
    for (i, &s) in sigma.image.iter().enumerate() {
        seq[s] = pi.image[i];
    }
    Ok(count_inversions(&mut seq))
}

/// Spearman's footrule `Σ |π(i) − σ(i)|`.
pub fn l1_distance(pi: &Permutation, sigma: &Permutation) -> Result<u64> {
    ensure_same_len(pi.len(), sigma.len())?;
    Ok(pi
        .image
        .iter()
        .zip(&sigma.image)
        .map(|(&a, &b)| a.abs_diff(b) as u64)
        .sum())
}

/// Maximum displacement `max |π(i) − σ(i)|`.
pub fn linf_distance(pi: &Permutation, sigma: &Permutation) -> Result<u64> {
    ensure_same_len(pi.len(), sigma.len())?;
    Ok(pi
        .image
        .iter()
        .zip(&sigma.image)
        .map(|(&a, &b)| a.abs_diff(b) as u64)
        .max()
        .unwrap_or(0))
}

/// Sorts `seq` in place and returns its inversion count.
pub(crate) fn count_inversions(seq: &mut [usize]) -> u64 {
    let mut buf = seq.to_vec();
    merge_count(seq, &mut buf)
}

fn merge_count(seq: &mut [usize], buf: &mut [usize]) -> u64 {
    let n = seq.len();
    if n <= 1 {
        return 0;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = seq.split_at_mut(mid);
        let (lbuf, rbuf) = buf.split_at_mut(mid);
        merge_count(left, lbuf) + merge_count(right, rbuf)
    };
    let (mut a, mut b, mut k) = (0, mid, 0);
    while a < mid && b < n {
        if seq[a] <= seq[b] {
            buf[k] = seq[a];
            a += 1;
        } else {
            buf[k] = seq[b];
            inv += (mid - a) as u64;
            b += 1;
        }
        k += 1;
    }
    buf[k..k + mid - a].copy_from_slice(&seq[a..mid]);
    k += mid - a;
    buf[k..k + n - b].copy_from_slice(&seq[b..n]);
    seq.copy_from_slice(&buf[..n]);
    inv
}

/// Lehmer-style inversion table: `b[i] = #{j > i : π(i) > π(j)}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InversionTable {
    entries: Vec<usize>,
}

impl InversionTable {
    /// Validates `0 <= b[i] <= n - i` (1-indexed `i`), i.e. `b[k] <= n - 1 - k`
    /// for the 0-indexed position `k`.
    pub fn new(entries: Vec<usize>) -> Result<Self> {
        let n = entries.len();
        if n == 0 {
            return Err(Error::InvalidPermutation("empty inversion table".into()));
        }
        for (k, &b) in entries.iter().enumerate() {
            let max = n - 1 - k;
            if b > max {
                return Err(Error::InvalidInversionTable {
                    index: k + 1,
                    value: b,
                    max,
                });
            }
        }
        Ok(InversionTable { entries })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&b| b as u64).sum()
    }
}

pub fn to_inversion_table(pi: &Permutation) -> InversionTable {
    let n = pi.len();
    let mut seen = Fenwick::new(n);
    let mut entries = vec![0; n];
    for i in (0..n).rev() {
        let v = pi.image[i];
        entries[i] = seen.prefix_sum(v) as usize;
        seen.add(v, 1);
    }
    InversionTable { entries }
}

pub fn from_inversion_table(table: &InversionTable) -> Permutation {
    let n = table.len();
    let mut free = Fenwick::new(n);
    for v in 0..n {
        free.add(v, 1);
    }
    let image = table
        .entries
        .iter()
        .map(|&b| {
            // π(i) is the b-th smallest (0-indexed) value not used by earlier positions
            let v = free.select(b as i64);
            free.add(v, -1);
            v
        })
        .collect();
    Permutation { image }
}

/// Binary indexed tree over `0..n` with order-statistic lookup.
struct Fenwick {
    tree: Vec<i64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, idx: usize, delta: i64) {
        let mut i = idx + 1;
        while i < self.tree.len() {
            self.tree[i] += delta;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over `0..idx`.
    fn prefix_sum(&self, idx: usize) -> i64 {
        let mut i = idx;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `k`.
    fn select(&self, mut k: i64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= k {
                pos = next;
                k -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Lexicographic stream over all of `𝔖_n`.
#[derive(Clone, Debug)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { image: current })
    }
}

fn next_lexicographic(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

pub fn enumerate_permutations(n: usize) -> Result<Permutations> {
    enumerate_permutations_capped(n, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_permutations_capped(n: usize, cap: usize) -> Result<Permutations> {
    if n == 0 {
        return Err(Error::out_of_range("n", n, "n >= 1"));
    }
    if n > cap {
        return Err(Error::EnumerationCap { n, cap });
    }
    Ok(Permutations {
        next: Some((0..n).collect()),
    })
}
