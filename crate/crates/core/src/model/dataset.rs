use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::perm::Permutation;

/// How the comparisons were drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SamplingModel {
    /// Each pair observed once with probability `p`.
    WithoutReplacement { p: f64 },
    /// `budget` pairs drawn uniformly with replacement.
    WithReplacement { budget: u64 },
}

impl SamplingModel {
    pub fn tag(&self) -> &'static str {
        match self {
            SamplingModel::WithoutReplacement { .. } => "without",
            SamplingModel::WithReplacement { .. } => "with",
        }
    }
}

impl fmt::Display for SamplingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingModel::WithoutReplacement { p } => write!(f, "without {p}"),
            SamplingModel::WithReplacement { budget } => write!(f, "with {budget}"),
        }
    }
}

/// Backing layout of the win counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Storage {
    Dense,
    Sparse,
}

impl Storage {
    /// Dense `n × n` counters unless fewer than `n²/8` comparisons are expected.
    pub fn for_budget(n: usize, expected_total: u64) -> Storage {
        if (expected_total as u128) * 8 < (n as u128) * (n as u128) {
            Storage::Sparse
        } else {
            Storage::Dense
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum PairStore {
    /// Row-major `A[i][j]`.
    Dense { wins: Vec<u32> },
    /// Row `i` lists every `j` with `N_ij > 0`, sorted by `j`, alongside
    /// `A_ij` and `A_ji`.
    Sparse {
        offsets: Vec<usize>,
        cols: Vec<u32>,
        wins: Vec<u32>,
        losses: Vec<u32>,
    },
}

/// Outcomes of pairwise comparisons among `n` items: `A_ij` is the number of
/// times item `i` beat item `j`, and `N_ij = A_ij + A_ji`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonDataset {
    n: usize,
    model: SamplingModel,
    seed: u64,
    total: u64,
    store: PairStore,
}

/// Iterator over `(j, A_ij, A_ji)` for the `j` compared with a fixed `i`.
pub enum RowIter<'a> {
    Dense {
        row: &'a [u32],
        col: &'a [u32],
        stride: usize,
        j: usize,
    },
    Sparse {
        cols: &'a [u32],
        wins: &'a [u32],
        losses: &'a [u32],
        k: usize,
    },
}

impl Iterator for RowIter<'_> {
    type Item = (usize, u32, u32);

    #[inline]
    fn next(&mut self) -> Option<Self::Item> {
        match self {
            RowIter::Dense {
                row,
                col,
                stride,
                j,
            } => {
                while *j < row.len() {
                    let k = *j;
                    *j += 1;
                    let (a, b) = (row[k], col[k * *stride]);
                    if a + b > 0 {
                        return Some((k, a, b));
                    }
                }
                None
            }
            RowIter::Sparse {
                cols,
                wins,
                losses,
                k,
            } => {
                let idx = *k;
                if idx >= cols.len() {
                    return None;
                }
                *k += 1;
                Some((cols[idx] as usize, wins[idx], losses[idx]))
            }
        }
    }
}

impl ComparisonDataset {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn model(&self) -> SamplingModel {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn set_model(&mut self, model: SamplingModel) {
        self.model = model;
    }

    /// `Σ_{i<j} N_ij`.
    pub fn total_comparisons(&self) -> u64 {
        self.total
    }

    pub fn storage(&self) -> Storage {
        match self.store {
            PairStore::Dense { .. } => Storage::Dense,
            PairStore::Sparse { .. } => Storage::Sparse,
        }
    }

    /// `A_ij` for 0-indexed items.
    pub fn wins(&self, i: usize, j: usize) -> u32 {
        match &self.store {
            PairStore::Dense { wins } => wins[i * self.n + j],
            PairStore::Sparse {
                offsets,
                cols,
                wins,
                ..
            } => {
                let range = offsets[i]..offsets[i + 1];
                match cols[range.clone()].binary_search(&(j as u32)) {
                    Ok(k) => wins[range.start + k],
                    Err(_) => 0,
                }
            }
        }
    }

    /// `N_ij`.
    pub fn count(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.wins(i, j) + self.wins(j, i)
        }
    }

    /// `(j, A_ij, A_ji)` for every `j` with `N_ij > 0`, ascending in `j`.
    pub fn row(&self, i: usize) -> RowIter<'_> {
        match &self.store {
            PairStore::Dense { wins } => RowIter::Dense {
                row: &wins[i * self.n..(i + 1) * self.n],
                col: &wins[i..],
                stride: self.n,
                j: 0,
            },
            PairStore::Sparse {
                offsets,
                cols,
                wins,
                losses,
            } => {
                let r = offsets[i]..offsets[i + 1];
                RowIter::Sparse {
                    cols: &cols[r.clone()],
                    wins: &wins[r.clone()],
                    losses: &losses[r],
                    k: 0,
                }
            }
        }
    }

    /// Borda scores `S_i = Σ_j A_ij`.
    pub fn win_totals(&self) -> Vec<u64> {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, a, _)| a as u64).sum())
            .collect()
    }

    /// `Σ_{i≠j} A_ij`, equal to the number of comparisons.
    pub fn total_wins(&self) -> u64 {
        self.total
    }

    /// The same comparisons with item `i` renamed to `relabel.rank(i)`.
    pub fn relabel(&self, relabel: &Permutation) -> Result<ComparisonDataset> {
        crate::error::ensure_same_len(self.n, relabel.len())?;
        let mut b = DatasetBuilder::with_storage(self.n, self.storage());
        for i in 0..self.n {
            for (j, a, _) in self.row(i) {
                b.add_wins(relabel.rank(i), relabel.rank(j), a);
            }
        }
        Ok(b.build(self.model, self.seed))
    }

    /// Same data in the other storage layout.
    pub fn with_storage(&self, storage: Storage) -> ComparisonDataset {
        let mut b = DatasetBuilder::with_storage(self.n, storage);
        for i in 0..self.n {
            for (j, a, _) in self.row(i) {
                b.add_wins(i, j, a);
            }
        }
        b.build(self.model, self.seed)
    }

    /// Pools several datasets over the same items. Budgets (or observation
    /// probabilities) add up; the seed is taken from the first part.
    pub fn merge(parts: &[ComparisonDataset]) -> Result<ComparisonDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Precondition("nothing to merge".into()))?;
        let n = first.n;
        let total: u64 = parts.iter().map(|d| d.total).sum();
        let mut model = first.model;
        for d in &parts[1..] {
            crate::error::ensure_same_len(n, d.n)?;
            model = match (model, d.model) {
                (
                    SamplingModel::WithReplacement { budget: a },
                    SamplingModel::WithReplacement { budget: b },
                ) => SamplingModel::WithReplacement { budget: a + b },
                (
                    SamplingModel::WithoutReplacement { p: a },
                    SamplingModel::WithoutReplacement { p: b },
                ) => SamplingModel::WithoutReplacement {
                    p: (a + b).min(1.0),
                },
                _ => {
                    return Err(Error::Precondition(
                        "cannot merge different sampling models".into(),
                    ))
                }
            };
        }
        let mut b = DatasetBuilder::new(n, total);
        for d in parts {
            for i in 0..n {
                for (j, a, _) in d.row(i) {
                    b.add_wins(i, j, a);
                }
            }
        }
        Ok(b.build(model, first.seed))
    }

    /// Builds from a full `n × n` win matrix (row `i` = wins of item `i`).
    pub fn from_win_matrix(wins: &[Vec<u32>], model: SamplingModel, seed: u64) -> Result<Self> {
        let n = wins.len();
        if n == 0 {
            return Err(Error::out_of_range("n", n, "n >= 1"));
        }
        let mut b = DatasetBuilder::with_storage(n, Storage::Dense);
        for (i, row) in wins.iter().enumerate() {
            crate::error::ensure_same_len(n, row.len())?;
            for (j, &a) in row.iter().enumerate() {
                if i == j && a != 0 {
                    return Err(Error::Precondition(format!("A[{0}][{0}] must be 0", i + 1)));
                }
                if i != j {
                    b.add_wins(i, j, a);
                }
            }
        }
        Ok(b.build(model, seed))
    }

    /// Writes the text format: a header `n model_tag budget seed`, then
    /// `i j N_ij A_ij` (1-indexed) for every ordered pair with `N_ij > 0`.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let budget = match self.model {
            SamplingModel::WithoutReplacement { p } => p.to_string(),
            SamplingModel::WithReplacement { budget } => budget.to_string(),
        };
        writeln!(
            w,
            "{} {} {} {}",
            self.n,
            self.model.tag(),
            budget,
            self.seed
        )?;
        for i in 0..self.n {
            for (j, a, b) in self.row(i) {
                writeln!(w, "{} {} {} {}", i + 1, j + 1, a + b, a)?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };
        let (hl, header) = loop {
            match lines.next() {
                Some((k, l)) => {
                    let l = l?;
                    if !l.trim().is_empty() {
                        break (k, l);
                    }
                }
                None => return Err(parse_err(0, "missing header".into())),
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(parse_err(
                hl,
                "header must be `n model_tag budget seed`".into(),
            ));
        }
        let n: usize = fields[0]
            .parse()
            .map_err(|e| parse_err(hl, format!("bad n: {e}")))?;
        if n == 0 {
            return Err(parse_err(hl, "n must be positive".into()));
        }
        let model = match fields[1] {
            "with" => SamplingModel::WithReplacement {
                budget: fields[2]
                    .parse()
                    .map_err(|e| parse_err(hl, format!("bad budget: {e}")))?,
            },
            "without" => SamplingModel::WithoutReplacement {
                p: fields[2]
                    .parse()
                    .map_err(|e| parse_err(hl, format!("bad p: {e}")))?,
            },
            other => return Err(parse_err(hl, format!("unknown model tag {other:?}"))),
        };
        let seed: u64 = fields[3]
            .parse()
            .map_err(|e| parse_err(hl, format!("bad seed: {e}")))?;

        let mut entries: Vec<(usize, usize, u32, u32)> = Vec::new();
        for (k, l) in lines {
            let l = l?;
            if l.trim().is_empty() {
                continue;
            }
            let nums = l
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(k, format!("bad entry: {e}")))?;
            if nums.len() != 4 {
                return Err(parse_err(k, "expected `i j N_ij A_ij`".into()));
            }
            let (i, j) = (nums[0] as usize, nums[1] as usize);
            if i == 0 || j == 0 || i > n || j > n || i == j {
                return Err(parse_err(k, format!("invalid pair ({i}, {j}) for n = {n}")));
            }
            if nums[3] > nums[2] || nums[2] > u32::MAX as u64 {
                return Err(parse_err(k, "need A_ij <= N_ij <= u32::MAX".into()));
            }
            entries.push((i - 1, j - 1, nums[2] as u32, nums[3] as u32));
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1));
        if let Some(w) = entries
            .windows(2)
            .find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(parse_err(
                0,
                format!("duplicate pair ({}, {})", w[0].0 + 1, w[0].1 + 1),
            ));
        }
        let lookup = |i: usize, j: usize| {
            entries
                .binary_search_by_key(&(i, j), |e| (e.0, e.1))
                .ok()
                .map(|k| entries[k])
        };
        let mut total = 0u64;
        for &(i, j, cnt, a) in &entries {
            match lookup(j, i) {
                Some((_, _, cnt2, a2)) if cnt2 == cnt && a + a2 == cnt => {}
                _ => {
                    return Err(parse_err(
                        0,
                        format!(
                            "pair ({}, {}) violates A_ij + A_ji = N_ij = N_ji",
                            i + 1,
                            j + 1
                        ),
                    ))
                }
            }
            if i < j {
                total += cnt as u64;
            }
        }
        if let SamplingModel::WithReplacement { budget } = model {
            if budget != total {
                return Err(parse_err(
                    hl,
                    format!("declared budget {budget} but file holds {total} comparisons"),
                ));
            }
        }
        let mut b = DatasetBuilder::new(n, total);
        for &(i, j, _, a) in &entries {
            b.add_wins(i, j, a);
        }
        Ok(b.build(model, seed))
    }
}

/// Accumulates outcomes, then freezes them into a [`ComparisonDataset`].
pub struct DatasetBuilder {
    n: usize,
    storage: Storage,
    dense: Vec<u32>,
    outcomes: Vec<(u32, u32, u32)>,
}

impl DatasetBuilder {
    /// Storage picked from the expected number of comparisons.
    pub fn new(n: usize, expected_total: u64) -> Self {
        Self::with_storage(n, Storage::for_budget(n, expected_total))
    }

    pub fn with_storage(n: usize, storage: Storage) -> Self {
        DatasetBuilder {
            n,
            storage,
            dense: match storage {
                Storage::Dense => vec![0; n * n],
                Storage::Sparse => Vec::new(),
            },
            outcomes: Vec::new(),
        }
    }

    /// Records that `winner` beat `loser` once.
    #[inline]
    pub fn record(&mut self, winner: usize, loser: usize) {
        self.add_wins(winner, loser, 1);
    }

    #[inline]
    pub fn add_wins(&mut self, winner: usize, loser: usize, times: u32) {
        debug_assert!(winner != loser && winner < self.n && loser < self.n);
        if times == 0 {
            return;
        }
        match self.storage {
            Storage::Dense => self.dense[winner * self.n + loser] += times,
            Storage::Sparse => self.outcomes.push((winner as u32, loser as u32, times)),
        }
    }

    pub fn build(self, model: SamplingModel, seed: u64) -> ComparisonDataset {
        let n = self.n;
        let (store, total) = match self.storage {
            Storage::Dense => {
                let total = self.dense.iter().map(|&a| a as u64).sum();
                (PairStore::Dense { wins: self.dense }, total)
            }
            Storage::Sparse => {
                // every outcome appears in both endpoint rows
                let mut half: Vec<(u32, u32, u32, u32)> =
                    Vec::with_capacity(self.outcomes.len() * 2);
                let mut total = 0u64;
                for (w, l, t) in self.outcomes {
                    total += t as u64;
                    half.push((w, l, t, 0));
                    half.push((l, w, 0, t));
                }
                half.sort_unstable_by_key(|e| (e.0, e.1));
                let mut offsets = vec![0usize; n + 1];
                let mut cols: Vec<u32> = Vec::new();
                let mut wins: Vec<u32> = Vec::new();
                let mut losses: Vec<u32> = Vec::new();
                let mut last: Option<(u32, u32)> = None;
                for (i, j, a, b) in half {
                    if last == Some((i, j)) {
                        *wins.last_mut().unwrap() += a;
                        *losses.last_mut().unwrap() += b;
                    } else {
                        cols.push(j);
                        wins.push(a);
                        losses.push(b);
                        offsets[i as usize + 1] += 1;
                        last = Some((i, j));
                    }
                }
                for k in 1..=n {
                    offsets[k] += offsets[k - 1];
                }
                (
                    PairStore::Sparse {
                        offsets,
                        cols,
                        wins,
                        losses,
                    },
                    total,
                )
            }
        };
        ComparisonDataset {
            n,
            model,
            seed,
            total,
            store,
        }
    }
}
