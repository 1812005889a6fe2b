//! Experiment definitions and the flat `key = value` config format.
//!
//! Keys (lists are comma-separated):
//!
//! | key | meaning |
//! |---|---|
//! | `kind` | `scaling_n`, `scaling_budget`, `region_snapshot`, `lambda_accuracy`, `mle_small_n` |
//! | `n` | item counts |
//! | `alpha` | budgets as fractions `N / C(n,2)` (for sampling without replacement this is `p`) |
//! | `budget` | absolute budgets `N`; replaces `alpha` |
//! | `lambda` | signal strengths |
//! | `model` | `with`, `without` |
//! | `replicates` | replicates per grid cell |
//! | `seed` | master seed |
//! | `estimators` | `ms`, `borda`, `random`, `mle`, `sieve` |
//! | `stages` | stage count `T`, or `auto` for `max(1, ⌊ln ln n⌋)` |
//! | `c0`, `c1` | multistage constants |
//! | `threshold_scale` | threshold multiplier, or `theory` for `10 + 2·c0` |
//! | `lambda_hat` | `oracle` (use the true `λ`), `estimate`, or a fixed value |
//! | `truth` | `random` or `identity` |
//! | `sieve_phi` | net radius for `sieve`; default is the clamped theoretical radius |
//! | `max_n`, `max_budget` | resource caps |
//! | `workers` | worker threads (0 = all cores) |
//! | `out`, `summary`, `timings`, `regions_dir` | output paths |

use std::path::{Path, PathBuf};

use noisy_sort::estimators::DEFAULT_THRESHOLD_SCALE;
use noisy_sort::perm::DEFAULT_ENUMERATION_CAP;

use crate::error::{HarnessError, Result};

/// Default cap on `n`.
pub const DEFAULT_MAX_N: usize = 10_000;
/// Default cap on the total comparisons of one replicate.
pub const DEFAULT_MAX_BUDGET: u64 = 1_000_000_000;
/// Environment variable read for the worker count.
pub const WORKERS_ENV: &str = "NOISY_SORT_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentKind {
    ScalingN,
    ScalingBudget,
    RegionSnapshot,
    LambdaAccuracy,
    MleSmallN,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::ScalingN,
        ExperimentKind::ScalingBudget,
        ExperimentKind::RegionSnapshot,
        ExperimentKind::LambdaAccuracy,
        ExperimentKind::MleSmallN,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ScalingN => "scaling_n",
            ExperimentKind::ScalingBudget => "scaling_budget",
            ExperimentKind::RegionSnapshot => "region_snapshot",
            ExperimentKind::LambdaAccuracy => "lambda_accuracy",
            ExperimentKind::MleSmallN => "mle_small_n",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim().replace('-', "_");
        let alias = match s.as_str() {
            "regions" => "region_snapshot",
            "lambda" => "lambda_accuracy",
            "mle_small" => "mle_small_n",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == alias)
            .ok_or_else(|| HarnessError::config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelChoice {
    With,
    Without,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::With => "with",
            ModelChoice::Without => "without",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "with" | "with_replacement" => Ok(ModelChoice::With),
            "without" | "without_replacement" => Ok(ModelChoice::Without),
            other => Err(HarnessError::config(format!(
                "unknown sampling model `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    Ms,
    Borda,
    Random,
    Mle,
    Sieve,
}

impl EstimatorId {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::Ms => "ms",
            EstimatorId::Borda => "borda",
            EstimatorId::Random => "random",
            EstimatorId::Mle => "mle",
            EstimatorId::Sieve => "sieve",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "ms" => Ok(EstimatorId::Ms),
            "borda" => Ok(EstimatorId::Borda),
            "random" => Ok(EstimatorId::Random),
            "mle" => Ok(EstimatorId::Mle),
            "sieve" => Ok(EstimatorId::Sieve),
            other => Err(HarnessError::config(format!("unknown estimator `{other}`"))),
        }
    }

    fn needs_enumeration(self) -> bool {
        matches!(self, EstimatorId::Mle | EstimatorId::Sieve)
    }
}

/// Size of the comparison budget for one grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Budget {
    /// `N = α·C(n,2)` comparisons, or observation probability `p = α`.
    Fraction(f64),
    /// Exactly `N` comparisons (or `p = N / C(n,2)`).
    Total(u64),
}

impl Budget {
    pub fn fraction(self, n: usize) -> f64 {
        match self {
            Budget::Fraction(a) => a,
            Budget::Total(t) => t as f64 / pairs(n) as f64,
        }
    }

    pub fn total(self, n: usize) -> u64 {
        match self {
            Budget::Fraction(a) => (a * pairs(n) as f64).round() as u64,
            Budget::Total(t) => t,
        }
    }
}

pub(crate) fn pairs(n: usize) -> u64 {
    (n as u64) * (n as u64).saturating_sub(1) / 2
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaHatMode {
    /// Use the true `λ`.
    Oracle,
    /// Estimate from a quarter of the budget each for pilot and holdout.
    Estimate,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruthMode {
    Random,
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub ns: Vec<usize>,
    pub budgets: Vec<Budget>,
    pub lambdas: Vec<f64>,
    pub models: Vec<ModelChoice>,
    pub replicates: usize,
    pub master_seed: u64,
    pub estimators: Vec<EstimatorId>,
    /// `None` means `max(1, ⌊ln ln n⌋)` per cell.
    pub stages: Option<usize>,
    pub c0: f64,
    pub c1: f64,
    /// `None` means the theoretical multiplier.
    pub threshold_scale: Option<f64>,
    pub lambda_hat: LambdaHatMode,
    pub truth: TruthMode,
    pub sieve_phi: Option<u64>,
    pub max_n: usize,
    pub max_budget: u64,
    /// `None` defers to the environment, then to all cores.
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub timings: Option<PathBuf>,
    pub regions_dir: Option<PathBuf>,
}

/// One point of the parameter grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub n: usize,
    pub budget: Budget,
    pub lambda: f64,
    pub model: ModelChoice,
}

impl ExperimentSpec {
    /// Desk-scale defaults for each kind.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let base = ExperimentSpec {
            kind,
            ns: vec![500, 1000, 2000, 4000],
            budgets: vec![Budget::Fraction(0.1)],
            lambdas: vec![0.25],
            models: vec![ModelChoice::With],
            replicates: 10,
            master_seed: 2024,
            estimators: vec![EstimatorId::Ms, EstimatorId::Borda, EstimatorId::Random],
            stages: None,
            c0: 1.0,
            c1: 8.0,
            threshold_scale: Some(DEFAULT_THRESHOLD_SCALE),
            lambda_hat: LambdaHatMode::Oracle,
            truth: TruthMode::Random,
            sieve_phi: None,
            max_n: DEFAULT_MAX_N,
            max_budget: DEFAULT_MAX_BUDGET,
            workers: None,
            out: None,
            summary: None,
            timings: None,
            regions_dir: None,
        };
        match kind {
            ExperimentKind::ScalingN => base,
            ExperimentKind::ScalingBudget => ExperimentSpec {
                ns: vec![2000],
                budgets: [0.01, 0.02, 0.05, 0.1].map(Budget::Fraction).to_vec(),
                ..base
            },
            ExperimentKind::RegionSnapshot => ExperimentSpec {
                ns: vec![2000],
                budgets: vec![Budget::Fraction(1.0)],
                replicates: 1,
                estimators: vec![EstimatorId::Ms, EstimatorId::Random],
                stages: Some(3),
                truth: TruthMode::Identity,
                ..base
            },
            ExperimentKind::LambdaAccuracy => ExperimentSpec {
                ns: vec![500],
                budgets: vec![Budget::Total(1_000_000)],
                estimators: vec![EstimatorId::Random],
                lambda_hat: LambdaHatMode::Estimate,
                ..base
            },
            ExperimentKind::MleSmallN => ExperimentSpec {
                ns: vec![5, 6, 7],
                budgets: vec![Budget::Fraction(1.0)],
                models: vec![ModelChoice::Without],
                estimators: vec![
                    EstimatorId::Mle,
                    EstimatorId::Sieve,
                    EstimatorId::Borda,
                    EstimatorId::Random,
                ],
                ..base
            },
        }
    }

    /// The full-scale grid: `n ∈ {1000, 2000, …, 10000}` for `scaling_n`, `n = 10000` for `scaling_budget`.
    pub fn full_scale(mut self) -> Self {
        if self.kind == ExperimentKind::ScalingN {
            self.ns = (1..=10).map(|k| k * 1000).collect();
        }
        if self.kind == ExperimentKind::ScalingBudget {
            self.ns = vec![10_000];
        }
        self
    }

    /// Reads a config file over the defaults of its `kind` (or of
    /// `fallback` when the file names none).
    pub fn from_file(path: &Path, fallback: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_config_str(&text, fallback)
    }

    pub fn from_config_str(text: &str, fallback: ExperimentKind) -> Result<Self> {
        let entries = parse_config(text)?;
        let kind = match entries.iter().find(|(k, _)| k == "kind") {
            Some((_, v)) => ExperimentKind::parse(v)?,
            None => fallback,
        };
        let mut spec = Self::defaults(kind);
        for (k, v) in &entries {
            if k != "kind" {
                spec.set(k, v)?;
            }
        }
        Ok(spec)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "kind" => self.kind = ExperimentKind::parse(v)?,
            "n" => self.ns = list(key, v, |s| num(key, s))?,
            "alpha" | "p" => self.budgets = list(key, v, |s| num(key, s).map(Budget::Fraction))?,
            "budget" => self.budgets = list(key, v, |s| num(key, s).map(Budget::Total))?,
            "lambda" => self.lambdas = list(key, v, |s| num(key, s))?,
            "model" => self.models = list(key, v, ModelChoice::parse)?,
            "replicates" => self.replicates = num(key, v)?,
            "seed" => self.master_seed = num(key, v)?,
            "estimators" => self.estimators = list(key, v, EstimatorId::parse)?,
            "stages" => {
                self.stages = if v == "auto" {
                    None
                } else {
                    Some(num(key, v)?)
                }
            }
            "c0" => self.c0 = num(key, v)?,
            "c1" => self.c1 = num(key, v)?,
            "threshold_scale" => {
                self.threshold_scale = if v == "theory" {
                    None
                } else {
                    Some(num(key, v)?)
                }
            }
            "lambda_hat" => {
                self.lambda_hat = match v {
                    "oracle" => LambdaHatMode::Oracle,
                    "estimate" => LambdaHatMode::Estimate,
                    other => LambdaHatMode::Fixed(num(key, other)?),
                }
            }
            "truth" => {
                self.truth = match v {
                    "random" => TruthMode::Random,
                    "identity" => TruthMode::Identity,
                    other => return Err(HarnessError::config(format!("truth: unknown `{other}`"))),
                }
            }
            "sieve_phi" => self.sieve_phi = Some(num(key, v)?),
            "max_n" => self.max_n = num(key, v)?,
            "max_budget" => self.max_budget = num(key, v)?,
            "workers" => self.workers = Some(num(key, v)?),
            "out" => self.out = Some(PathBuf::from(v)),
            "summary" => self.summary = Some(PathBuf::from(v)),
            "timings" => self.timings = Some(PathBuf::from(v)),
            "regions_dir" => self.regions_dir = Some(PathBuf::from(v)),
            other => return Err(HarnessError::config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks ranges and resource caps.
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty()
            || self.budgets.is_empty()
            || self.lambdas.is_empty()
            || self.models.is_empty()
        {
            return Err(HarnessError::config("every grid list must be nonempty"));
        }
        if self.replicates == 0 {
            return Err(HarnessError::config("replicates must be >= 1"));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::config("estimator set is empty"));
        }
        if self.stages == Some(0) {
            return Err(HarnessError::config("stages must be >= 1"));
        }
        for &l in &self.lambdas {
            if !(l > 0.0 && l < 0.5) {
                return Err(HarnessError::config(format!(
                    "lambda = {l} outside (0, 1/2)"
                )));
            }
        }
        for cell in self.cells() {
            let n = cell.n;
            if n > self.max_n {
                return Err(HarnessError::cap("n", n, self.max_n));
            }
            let min_n = if self.lambda_hat == LambdaHatMode::Estimate {
                4
            } else {
                2
            };
            if n < min_n {
                return Err(HarnessError::config(format!("n = {n} below {min_n}")));
            }
            let total = cell.budget.total(n);
            if total > self.max_budget {
                return Err(HarnessError::cap("budget", total, self.max_budget));
            }
            if total == 0 {
                return Err(HarnessError::config(format!(
                    "budget rounds to zero at n = {n}"
                )));
            }
            if cell.model == ModelChoice::Without {
                let p = cell.budget.fraction(n);
                if !(p > 0.0 && p <= 1.0) {
                    return Err(HarnessError::config(format!(
                        "observation probability {p} outside (0, 1] at n = {n}"
                    )));
                }
            }
            if n > DEFAULT_ENUMERATION_CAP && self.estimators.iter().any(|e| e.needs_enumeration())
            {
                return Err(HarnessError::cap(
                    "n for mle/sieve",
                    n,
                    DEFAULT_ENUMERATION_CAP,
                ));
            }
        }
        Ok(())
    }

    /// Grid cells in `n`, budget, `λ`, model order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &budget in &self.budgets {
                for &lambda in &self.lambdas {
                    for &model in &self.models {
                        out.push(Cell {
                            index: out.len(),
                            n,
                            budget,
                            lambda,
                            model,
                        });
                    }
                }
            }
        }
        out
    }

    /// Estimators to run, always including the random control.
    pub fn estimator_set(&self) -> Vec<EstimatorId> {
        let mut set = self.estimators.clone();
        if !set.contains(&EstimatorId::Random) {
            set.push(EstimatorId::Random);
        }
        set.sort();
        set.dedup();
        set
    }

    /// Explicit setting, then the environment variable, then all cores.
    pub fn worker_count(&self) -> usize {
        self.workers
            .or_else(|| {
                std::env::var(WORKERS_ENV)
                    .ok()
                    .and_then(|v| v.trim().parse().ok())
            })
            .unwrap_or(0)
    }
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            HarnessError::config(format!("line {}: expected key = value", lineno + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(key: &str, s: &str) -> Result<T> {
    let s = s.trim().replace('_', "");
    s.parse()
        .or_else(|_| {
            // allow 1e6-style integers
            s.parse::<f64>()
                .ok()
                .filter(|f| f.fract() == 0.0)
                .and_then(|f| format!("{f:.0}").parse().ok())
                .ok_or(())
        })
        .map_err(|_| HarnessError::config(format!("{key}: cannot parse `{s}`")))
}

fn list<T>(key: &str, s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<T> = s
        .split(',')
        .filter(|x| !x.trim().is_empty())
        .map(|x| f(x.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(HarnessError::config(format!("{key}: empty list")));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_overrides_defaults() {
        let text = "# comment\nkind = scaling_budget\nn = 300\nalpha = 0.01, 0.1\nreplicates=2\nbudget_ignored_below=1\n";
        assert!(ExperimentSpec::from_config_str(text, ExperimentKind::ScalingN).is_err());
        let text = "kind = scaling_budget\nn = 300\nalpha = 0.01, 0.1\nreplicates=2\nthreshold_scale = theory\n";
        let s = ExperimentSpec::from_config_str(text, ExperimentKind::ScalingN).unwrap();
        assert_eq!(s.kind, ExperimentKind::ScalingBudget);
        assert_eq!(s.ns, vec![300]);
        assert_eq!(
            s.budgets,
            vec![Budget::Fraction(0.01), Budget::Fraction(0.1)]
        );
        assert_eq!(s.replicates, 2);
        assert_eq!(s.threshold_scale, None);
        assert_eq!(s.cells().len(), 2);
    }

    #[test]
    fn numbers_accept_scientific_integers() {
        let mut s = ExperimentSpec::defaults(ExperimentKind::LambdaAccuracy);
        s.set("budget", "1e6").unwrap();
        assert_eq!(s.budgets, vec![Budget::Total(1_000_000)]);
        assert!(s.set("replicates", "2.5").is_err());
    }

    #[test]
    fn caps_and_ranges() {
        let mut s = ExperimentSpec::defaults(ExperimentKind::ScalingN);
        s.validate().unwrap();
        s.ns = vec![20_000];
        assert!(matches!(
            s.validate(),
            Err(HarnessError::ResourceCap { .. })
        ));
        let mut s = ExperimentSpec::defaults(ExperimentKind::MleSmallN);
        s.validate().unwrap();
        s.ns = vec![12];
        assert!(matches!(
            s.validate(),
            Err(HarnessError::ResourceCap { .. })
        ));
        let mut s = ExperimentSpec::defaults(ExperimentKind::ScalingN);
        s.models = vec![ModelChoice::Without];
        s.budgets = vec![Budget::Fraction(1.5)];
        assert!(matches!(s.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn random_control_always_present() {
        let mut s = ExperimentSpec::defaults(ExperimentKind::ScalingN);
        s.estimators = vec![EstimatorId::Ms];
        assert_eq!(
            s.estimator_set(),
            vec![EstimatorId::Ms, EstimatorId::Random]
        );
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in ExperimentKind::ALL {
            assert_eq!(ExperimentKind::parse(k.as_str()).unwrap(), k);
        }
        assert_eq!(
            ExperimentKind::parse("scaling-n").unwrap(),
            ExperimentKind::ScalingN
        );
        assert_eq!(
            ExperimentKind::parse("regions").unwrap(),
            ExperimentKind::RegionSnapshot
        );
    }
}
