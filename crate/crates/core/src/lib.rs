//! Ranking from noisy pairwise comparisons.
//!
//! Items are ordered by a hidden permutation `π*` (rank 1 is the weakest).
//! Each comparison between two items is won by the stronger one with
//! probability at least `1/2 + λ`. This crate generates such data under two
//! sampling regimes, estimates `π*` with a multistage sort and several
//! baselines, and provides the permutation combinatorics (inversion counts,
//! Kendall-tau balls, packings) and information quantities used to bound the
//! achievable error.
//!
//! Permutations are stored 0-indexed; text formats and the `*_one_based`
//! constructors are 1-indexed.

pub mod combinatorics;
pub mod error;
pub mod estimators;
pub mod model;
pub mod perm;
pub mod seed;
pub mod theory;

pub use error::{Error, Result};
pub use model::{ComparisonDataset, ProbabilityMatrix, SamplingModel};
pub use perm::{kendall_tau, l1_distance, linf_distance, Permutation};
