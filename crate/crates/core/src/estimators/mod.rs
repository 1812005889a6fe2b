//! Ranking estimators: Borda score-sort, the `λ` estimate, the multistage
//! sort, and maximum-likelihood baselines.

mod borda;
mod mle;
mod multistage;

pub use borda::{borda_sort, estimate_lambda, LambdaEstimate, LAMBDA_CLAMP};
pub use mle::{
    brute_force_mle, brute_force_mle_capped, clamp_phi, mle_objective, sieve_mle, theoretical_phi,
};
pub use multistage::{
    default_stages, ms_sort, uncertainty_region, MsConfig, MsOutput, MsState, Relation, TieBreak,
    UncertaintyRegion, DEFAULT_THRESHOLD_SCALE,
};
