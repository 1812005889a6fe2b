use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use noisy_sort::combinatorics::{greedy_maximal_packing, PackingSet, Universe};
use noisy_sort::estimators::{
    borda_sort, brute_force_mle, clamp_phi, default_stages, estimate_lambda, ms_sort, sieve_mle,
    theoretical_phi, MsConfig, MsState,
};
use noisy_sort::model::{
    sample_without_replacement, split_with_replacement, split_without_replacement, stage_budgets,
    ComparisonDataset, ProbabilityMatrix, SamplingModel,
};
use noisy_sort::perm::{kendall_tau, l1_distance, linf_distance, Permutation};
use noisy_sort::seed::{derive_path, derive_seed, rng_from_seed};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::output::{self, ResultRow};
use crate::regions::emit_regions;
use crate::spec::{
    Budget, Cell, EstimatorId, ExperimentKind, ExperimentSpec, LambdaHatMode, ModelChoice,
    TruthMode,
};

/// Estimator id used for the pilot ranking when `λ̂` is estimated.
pub const PILOT_ESTIMATOR: &str = "lambda_pilot";

/// Multistage states kept for region export.
#[derive(Clone, Debug)]
pub struct RegionRecord {
    pub cell: usize,
    pub n: usize,
    pub replicate: usize,
    pub states: Vec<MsState>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub regions: Vec<RegionRecord>,
}

/// Seed of replicate `rep` in cell `cell`.
pub fn replicate_seed(master: u64, cell: usize, rep: usize) -> u64 {
    derive_path(master, &[cell as u64, rep as u64])
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let estimators = spec.estimator_set();
    let cells = spec.cells();
    let nets = sieve_nets(spec, &cells, &estimators)?;
    let jobs: Vec<(Cell, usize)> = cells
        .iter()
        .flat_map(|&c| (0..spec.replicates).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.worker_count())
        .build()
        .map_err(|e| HarnessError::config(format!("thread pool: {e}")))?;
    let results: Vec<(Vec<ResultRow>, Option<RegionRecord>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(cell, rep)| run_replicate(spec, cell, rep, &estimators, nets.get(&cell.index)))
            .collect::<Result<_>>()
    })?;
    let mut out = ExperimentOutput::default();
    for (rows, region) in results {
        out.rows.extend(rows);
        out.regions.extend(region);
    }
    Ok(out)
}

fn sieve_nets(
    spec: &ExperimentSpec,
    cells: &[Cell],
    estimators: &[EstimatorId],
) -> Result<HashMap<usize, PackingSet>> {
    let mut nets = HashMap::new();
    if !estimators.contains(&EstimatorId::Sieve) {
        return Ok(nets);
    }
    for c in cells {
        let phi = match spec.sieve_phi {
            Some(p) => p,
            None => {
                let model = match c.model {
                    ModelChoice::With => SamplingModel::WithReplacement {
                        budget: c.budget.total(c.n),
                    },
                    ModelChoice::Without => SamplingModel::WithoutReplacement {
                        p: c.budget.fraction(c.n),
                    },
                };
                clamp_phi(theoretical_phi(model, c.n, c.lambda)?, c.n)
            }
        };
        nets.insert(c.index, greedy_maximal_packing(c.n, phi, &Universe::All)?);
    }
    Ok(nets)
}

/// Parameters of one generated instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialParams {
    pub n: usize,
    pub lambda: f64,
    pub model: ModelChoice,
    pub budget: Budget,
    pub seed: u64,
    /// Hidden ranking is the identity rather than random.
    pub identity: bool,
}

/// Data of one replicate: everything pooled, the stage samples, and the
/// pilot/holdout pair when `λ` is estimated.
pub struct ReplicateData {
    pub full: ComparisonDataset,
    pub stages: Vec<ComparisonDataset>,
    pub lambda_pair: Option<(ComparisonDataset, ComparisonDataset)>,
}

/// Draws the data of one instance under `M*_n(λ)`. Sampling with
/// replacement spends a quarter of the budget on each of the pilot and
/// holdout samples when `estimate` is set; without replacement the observed
/// comparisons are split in half instead.
pub fn generate(
    truth: &Permutation,
    params: &TrialParams,
    stages: usize,
    estimate: bool,
) -> Result<ReplicateData> {
    let n = params.n;
    let m = &ProbabilityMatrix::star(n, params.lambda)?;
    let seed = params.seed;
    match params.model {
        ModelChoice::With => {
            let total = params.budget.total(n);
            let (lead, rest) = if estimate {
                (total / 4, total - 2 * (total / 4))
            } else {
                (0, total)
            };
            if estimate && lead == 0 {
                return Err(HarnessError::config("budget too small to estimate lambda"));
            }
            if rest < stages as u64 {
                return Err(HarnessError::config(format!(
                    "budget {rest} smaller than the {stages} stages"
                )));
            }
            let mut budgets = if estimate { vec![lead, lead] } else { vec![] };
            budgets.extend(stage_budgets(rest, stages));
            let mut parts =
                split_with_replacement(truth, m, total, &budgets, derive_seed(seed, 1))?;
            let full = ComparisonDataset::merge(&parts)?;
            let lambda_pair = if estimate {
                let rest = parts.split_off(2);
                let mut it = std::mem::replace(&mut parts, rest).into_iter();
                Some((it.next().unwrap(), it.next().unwrap()))
            } else {
                None
            };
            Ok(ReplicateData {
                full,
                stages: parts,
                lambda_pair,
            })
        }
        ModelChoice::Without => {
            let p = params.budget.fraction(n);
            let full = sample_without_replacement(truth, m, p, derive_seed(seed, 1))?;
            if estimate {
                let halves = split_without_replacement(&full, 2, derive_seed(seed, 2))?;
                let mut pair =
                    split_without_replacement(&halves[0], 2, derive_seed(seed, 3))?.into_iter();
                let stage_parts =
                    split_without_replacement(&halves[1], stages, derive_seed(seed, 4))?;
                Ok(ReplicateData {
                    full,
                    stages: stage_parts,
                    lambda_pair: Some((pair.next().unwrap(), pair.next().unwrap())),
                })
            } else {
                let stage_parts = split_without_replacement(&full, stages, derive_seed(seed, 2))?;
                Ok(ReplicateData {
                    full,
                    stages: stage_parts,
                    lambda_pair: None,
                })
            }
        }
    }
}

fn run_replicate(
    spec: &ExperimentSpec,
    cell: Cell,
    rep: usize,
    estimators: &[EstimatorId],
    net: Option<&PackingSet>,
) -> Result<(Vec<ResultRow>, Option<RegionRecord>)> {
    let n = cell.n;
    let seed = replicate_seed(spec.master_seed, cell.index, rep);
    let truth = match spec.truth {
        TruthMode::Identity => Permutation::identity(n),
        TruthMode::Random => Permutation::random(n, &mut rng_from_seed(derive_seed(seed, 0))),
    };
    let stages = spec.stages.unwrap_or_else(|| default_stages(n));
    let estimate = spec.lambda_hat == LambdaHatMode::Estimate;
    let params = TrialParams {
        n,
        lambda: cell.lambda,
        model: cell.model,
        budget: cell.budget,
        seed,
        identity: spec.truth == TruthMode::Identity,
    };
    let data = generate(&truth, &params, stages, estimate)?;

    let row = |estimator: &str,
               est: &Permutation,
               lambda_hat: Option<f64>,
               ms: f64|
     -> Result<ResultRow> {
        Ok(ResultRow {
            kind: spec.kind.as_str().to_string(),
            n,
            model: cell.model.as_str().to_string(),
            alpha: cell.budget.fraction(n),
            budget: data.full.total_comparisons(),
            lambda: cell.lambda,
            replicate: rep,
            seed,
            estimator: estimator.to_string(),
            stages,
            lambda_hat,
            d_kt: kendall_tau(est, &truth)?,
            l1: l1_distance(est, &truth)?,
            linf: linf_distance(est, &truth)?,
            runtime_ms: ms,
        })
    };

    let mut rows = Vec::new();
    let started = Instant::now();
    let lambda_hat = match spec.lambda_hat {
        LambdaHatMode::Oracle => cell.lambda,
        LambdaHatMode::Fixed(v) => v,
        LambdaHatMode::Estimate => {
            let (pilot, holdout) = data
                .lambda_pair
                .as_ref()
                .expect("estimate mode keeps a pair");
            let est = estimate_lambda(pilot, holdout)?;
            rows.push(row(
                PILOT_ESTIMATOR,
                &est.pilot,
                Some(est.lambda_hat),
                elapsed(started),
            )?);
            est.lambda_hat
        }
    };

    let mut region = None;
    for &e in estimators {
        let started = Instant::now();
        let (est, lh) = match e {
            EstimatorId::Ms => {
                let cfg = MsConfig {
                    stages,
                    c0: spec.c0,
                    c1: spec.c1,
                    threshold_scale: spec.threshold_scale,
                    ..Default::default()
                };
                let out = ms_sort(&data.stages, lambda_hat, &cfg)?;
                if spec.kind == ExperimentKind::RegionSnapshot {
                    region = Some(RegionRecord {
                        cell: cell.index,
                        n,
                        replicate: rep,
                        states: out.states.clone(),
                    });
                }
                (out.estimate, Some(out.lambda_hat))
            }
            EstimatorId::Borda => (borda_sort(&data.full), None),
            EstimatorId::Random => (
                Permutation::random(n, &mut rng_from_seed(derive_seed(seed, 5))),
                None,
            ),
            EstimatorId::Mle => (brute_force_mle(&data.full)?, None),
            EstimatorId::Sieve => (
                sieve_mle(&data.full, net.expect("net built for sieve"))?,
                None,
            ),
        };
        rows.push(row(e.as_str(), &est, lh, elapsed(started))?);
    }
    Ok((rows, region))
}

fn elapsed(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Writes the results CSV and any summary, timings and region files named by
/// `spec`. Regions go directly into `regions_dir` for a single record and into
/// per-replicate subdirectories otherwise.
pub fn write_outputs(spec: &ExperimentSpec, output: &ExperimentOutput) -> Result<()> {
    if let Some(p) = &spec.out {
        output::write_rows_to(&output.rows, p)?;
    }
    if let Some(p) = &spec.summary {
        let s = output::summarize(&output.rows)?;
        output::write_summary(&s, std::fs::File::create(p)?)?;
    }
    if let Some(p) = &spec.timings {
        output::write_timings(&output.rows, std::fs::File::create(p)?)?;
    }
    if let Some(dir) = &spec.regions_dir {
        write_region_records(&output.regions, dir)?;
    }
    Ok(())
}

pub fn write_region_records(records: &[RegionRecord], dir: &Path) -> Result<()> {
    if let [only] = records {
        emit_regions(&only.states, dir)?;
        return Ok(());
    }
    for r in records {
        let sub = dir.join(format!("n{}_cell{}_rep{}", r.n, r.cell, r.replicate));
        emit_regions(&r.states, &sub)?;
    }
    Ok(())
}
