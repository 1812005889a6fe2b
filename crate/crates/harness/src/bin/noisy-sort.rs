use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use noisy_sort::combinatorics::{
    count_at_most_k_inversions, entropy_bounds, max_inversions, EntropyReport,
};
use noisy_sort::estimators::{default_stages, ms_sort, MsConfig};
use noisy_sort::model::{
    sample_with_replacement, sample_without_replacement, ComparisonDataset, ProbabilityMatrix,
};
use noisy_sort::perm::{kendall_tau, l1_distance, linf_distance, Permutation};
use noisy_sort::seed::{derive_seed, rng_from_seed};
use noisy_sort::theory::{
    bernoulli_kl, binomial_tail_bounds, empirical_binomial_tails, model_kl, rate_curve, RateKind,
};
use noisy_sort::SamplingModel;
use noisy_sort_harness::output::{self, slope_vs_inverse_alpha, slope_vs_n};
use noisy_sort_harness::regions::emit_regions;
use noisy_sort_harness::run::{generate, write_outputs, TrialParams};
use noisy_sort_harness::spec::{
    Budget, ExperimentKind, ExperimentSpec, ModelChoice, DEFAULT_MAX_N,
};
use noisy_sort_harness::{run_experiment, HarnessError};

/// Largest `n · k` table the inversion counter will fill.
const MAX_COUNT_WORK: u64 = 200_000_000;

#[derive(Parser)]
#[command(
    name = "noisy-sort",
    version,
    about = "Ranking from noisy pairwise comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a comparison dataset.
    Simulate(SimulateArgs),
    /// Run the multistage sort on stage files or freshly generated data.
    RunMs(RunMsArgs),
    /// Exact number of permutations of n items with at most k inversions.
    CountInversions {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: u64,
    },
    /// Metric-entropy bounds for a Kendall-tau ball, as a CSV row.
    EntropyCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        eps: u64,
    },
    /// KL divergences, binomial tail bounds and rate curves, as CSV.
    Theory(TheoryArgs),
    /// Run an experiment grid.
    Experiment(Box<ExperimentArgs>),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    With,
    Without,
}

impl From<ModelArg> for ModelChoice {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::With => ModelChoice::With,
            ModelArg::Without => ModelChoice::Without,
        }
    }
}

fn sampling_model(model: ModelArg, budget: f64) -> anyhow::Result<SamplingModel> {
    Ok(match model {
        ModelArg::With => {
            if budget < 1.0 || budget.fract() != 0.0 {
                bail!("--budget must be a positive integer N under sampling with replacement");
            }
            SamplingModel::WithReplacement {
                budget: budget as u64,
            }
        }
        ModelArg::Without => SamplingModel::WithoutReplacement { p: budget },
    })
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// N for `with`, p for `without`.
    #[arg(long)]
    budget: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the hidden ranking here.
    #[arg(long)]
    truth_out: Option<PathBuf>,
    /// Use the identity as the hidden ranking.
    #[arg(long)]
    identity: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
}

#[derive(Args)]
struct RunMsArgs {
    /// One dataset file per stage.
    #[arg(long = "in", num_args = 1.., conflicts_with = "generate")]
    inputs: Vec<PathBuf>,
    /// Generate data instead: `n=..,lambda=..,model=with|without,alpha=..|budget=..,seed=..,truth=random|identity`.
    #[arg(long)]
    generate: Option<String>,
    #[arg(long = "T")]
    stages: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long, default_value_t = 8.0)]
    c1: f64,
    /// Threshold multiplier; defaults to the calibrated value.
    #[arg(long, conflicts_with = "theoretical")]
    threshold_scale: Option<f64>,
    /// Use the theoretical threshold multiplier `10 + 2·c0`.
    #[arg(long)]
    theoretical: bool,
    /// Required with `--in`; defaults to the true λ with `--generate`.
    #[arg(long)]
    lambda_hat: Option<f64>,
    /// Hidden ranking, to report distances (implied by `--generate`).
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    regions_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_N)]
    max_n: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoryOp {
    Kl,
    Tail,
    Rate,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, value_enum)]
    op: TheoryOp,
    /// Bernoulli KL: first parameter; tail: success probability.
    #[arg(long)]
    p: Option<f64>,
    /// Bernoulli KL: second parameter.
    #[arg(long)]
    q: Option<f64>,
    /// Model KL: first ranking, space-separated 1-indexed.
    #[arg(long, requires = "sigma")]
    pi: Option<String>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Model KL and rate: N, or p without replacement.
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Tail: number of trials.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Tail: Monte-Carlo draws for the empirical check (0 skips it).
    #[arg(long, default_value_t = 0)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rate: minimax_o1, minimax_o2, ms_upper, lower_o1, lower_o2.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    ScalingN,
    ScalingBudget,
    Regions,
    Lambda,
    MleSmall,
}

impl From<KindArg> for ExperimentKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::ScalingN => ExperimentKind::ScalingN,
            KindArg::ScalingBudget => ExperimentKind::ScalingBudget,
            KindArg::Regions => ExperimentKind::RegionSnapshot,
            KindArg::Lambda => ExperimentKind::LambdaAccuracy,
            KindArg::MleSmall => ExperimentKind::MleSmallN,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: KindArg,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Full-scale grid (n up to 10000).
    #[arg(long)]
    full: bool,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    budget: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    lambda_hat: Option<String>,
    #[arg(long)]
    threshold_scale: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    /// Results CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    timings: Option<PathBuf>,
    #[arg(long)]
    regions_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let capped = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<HarnessError>(),
            Some(HarnessError::ResourceCap { .. })
        ) || matches!(
            c.downcast_ref::<HarnessError>(),
            Some(HarnessError::Core(noisy_sort::Error::EnumerationCap { .. }))
        ) || matches!(
            c.downcast_ref::<noisy_sort::Error>(),
            Some(noisy_sort::Error::EnumerationCap { .. })
        )
    });
    if capped {
        2
    } else {
        1
    }
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a),
        Command::RunMs(a) => run_ms(a),
        Command::CountInversions { n, k } => {
            if n == 0 || k > max_inversions(n) {
                bail!("need n >= 1 and 0 <= k <= n(n-1)/2");
            }
            let work = (n as u64).saturating_mul(k + 1);
            if work > MAX_COUNT_WORK {
                return Err(HarnessError::cap("n * (k + 1)", work, MAX_COUNT_WORK).into());
            }
            println!("{}", count_at_most_k_inversions(n, k)?);
            Ok(())
        }
        Command::EntropyCheck { n, r, eps } => {
            let report = entropy_bounds(n, r, eps)?;
            println!("{}", EntropyReport::CSV_HEADER);
            println!("{}", report.csv_row());
            Ok(())
        }
        Command::Theory(a) => theory(a),
        Command::Experiment(a) => experiment(*a),
    }
}

fn truth_for(n: usize, identity: bool, seed: u64) -> Permutation {
    if identity {
        Permutation::identity(n)
    } else {
        Permutation::random(n, &mut rng_from_seed(derive_seed(seed, 0)))
    }
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    if a.n > a.max_n {
        return Err(HarnessError::cap("n", a.n, a.max_n).into());
    }
    let truth = truth_for(a.n, a.identity, a.seed);
    let m = ProbabilityMatrix::star(a.n, a.lambda)?;
    let data = match sampling_model(a.model, a.budget)? {
        SamplingModel::WithReplacement { budget } => {
            sample_with_replacement(&truth, &m, budget, a.seed)?
        }
        SamplingModel::WithoutReplacement { p } => {
            sample_without_replacement(&truth, &m, p, a.seed)?
        }
    };
    let file =
        std::fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    data.write_to(std::io::BufWriter::new(file))?;
    if let Some(p) = a.truth_out {
        std::fs::write(&p, format!("{truth}\n"))?;
    }
    eprintln!(
        "wrote {} comparisons among {} items",
        data.total_comparisons(),
        a.n
    );
    Ok(())
}

fn parse_generate(spec: &str, max_n: usize) -> anyhow::Result<TrialParams> {
    let mut p = TrialParams {
        n: 0,
        lambda: 0.25,
        model: ModelChoice::With,
        budget: Budget::Fraction(1.0),
        seed: 0,
        identity: false,
    };
    for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = part
            .split_once('=')
            .with_context(|| format!("--generate: expected key=value, got `{part}`"))?;
        let v = v.trim();
        match k.trim() {
            "n" => p.n = v.parse()?,
            "lambda" => p.lambda = v.parse()?,
            "model" => p.model = ModelChoice::parse(v)?,
            "alpha" | "p" => p.budget = Budget::Fraction(v.parse()?),
            "budget" => p.budget = Budget::Total(v.parse::<f64>()? as u64),
            "seed" => p.seed = v.parse()?,
            "truth" => p.identity = v == "identity",
            other => bail!("--generate: unknown key `{other}`"),
        }
    }
    if p.n < 2 {
        bail!("--generate needs n >= 2");
    }
    if p.n > max_n {
        return Err(HarnessError::cap("n", p.n, max_n).into());
    }
    Ok(p)
}

fn read_perm(path: &PathBuf) -> anyhow::Result<Permutation> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.trim().parse()?)
}

fn run_ms(a: RunMsArgs) -> anyhow::Result<()> {
    let (stages_data, lambda_hat, truth) = if let Some(g) = &a.generate {
        let p = parse_generate(g, a.max_n)?;
        let t = a.stages.unwrap_or_else(|| default_stages(p.n));
        let truth = truth_for(p.n, p.identity, p.seed);
        let data = generate(&truth, &p, t, false)?;
        (data.stages, a.lambda_hat.unwrap_or(p.lambda), Some(truth))
    } else {
        if a.inputs.is_empty() {
            bail!("give either --in FILE... or --generate");
        }
        let lambda_hat = a.lambda_hat.context("--lambda-hat is required with --in")?;
        let mut data = Vec::new();
        for path in &a.inputs {
            let f =
                std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            let d = ComparisonDataset::read_from(std::io::BufReader::new(f))?;
            if d.n() > a.max_n {
                return Err(HarnessError::cap("n", d.n(), a.max_n).into());
            }
            data.push(d);
        }
        if let Some(t) = a.stages {
            if t != data.len() {
                bail!("--T {t} but {} stage files given", data.len());
            }
        }
        let truth = a.truth.as_ref().map(read_perm).transpose()?;
        (data, lambda_hat, truth)
    };
    let cfg = MsConfig {
        stages: stages_data.len(),
        c0: a.c0,
        c1: a.c1,
        threshold_scale: if a.theoretical {
            None
        } else {
            a.threshold_scale.or(MsConfig::default().threshold_scale)
        },
        ..Default::default()
    };
    let out = ms_sort(&stages_data, lambda_hat, &cfg)?;
    if let Some(dir) = &a.regions_dir {
        emit_regions(&out.states, dir)?;
    }
    match &a.out {
        Some(p) => std::fs::write(p, format!("{}\n", out.estimate))?,
        None => writeln!(std::io::stdout().lock(), "{}", out.estimate)?,
    }
    let mut err = std::io::stderr().lock();
    writeln!(err, "stage,region_size")?;
    for st in &out.states {
        writeln!(err, "{},{}", st.stage(), st.region_size())?;
    }
    if let Some(t) = truth {
        writeln!(
            err,
            "d_kt={} l1={} linf={}",
            kendall_tau(&out.estimate, &t)?,
            l1_distance(&out.estimate, &t)?,
            linf_distance(&out.estimate, &t)?
        )?;
    }
    Ok(())
}

fn need<T>(v: Option<T>, flag: &str) -> anyhow::Result<T> {
    v.with_context(|| format!("--{flag} is required for this operation"))
}

fn theory(a: TheoryArgs) -> anyhow::Result<()> {
    match a.op {
        TheoryOp::Kl => {
            if let (Some(pi), Some(sigma)) = (&a.pi, &a.sigma) {
                let pi: Permutation = pi.parse()?;
                let sigma: Permutation = sigma.parse()?;
                let model = sampling_model(need(a.model, "model")?, need(a.budget, "budget")?)?;
                let lambda = need(a.lambda, "lambda")?;
                let v = model_kl(&pi, &sigma, model, lambda)?;
                println!("d_kt,model,budget,lambda,kl");
                let budget = match model {
                    SamplingModel::WithReplacement { budget } => budget as f64,
                    SamplingModel::WithoutReplacement { p } => p,
                };
                println!(
                    "{},{},{budget},{lambda},{v}",
                    kendall_tau(&pi, &sigma)?,
                    model.tag()
                );
            } else {
                let (p, q) = (need(a.p, "p")?, need(a.q, "q")?);
                println!("p,q,kl");
                println!("{p},{q},{}", bernoulli_kl(p, q)?);
            }
        }
        TheoryOp::Tail => {
            let trials = need(a.trials, "trials")?;
            let (p, r, s) = (need(a.p, "p")?, need(a.r, "r")?, need(a.s, "s")?);
            let b = binomial_tail_bounds(trials, p, r, s)?;
            if a.draws > 0 {
                let e = empirical_binomial_tails(trials, p, r, s, a.draws, a.seed)?;
                println!(
                    "trials,p,r,s,lower_bound,upper_bound,draws,empirical_lower,empirical_upper"
                );
                println!(
                    "{trials},{p},{r},{s},{},{},{},{},{}",
                    b.lower, b.upper, a.draws, e.lower, e.upper
                );
            } else {
                println!("trials,p,r,s,lower_bound,upper_bound");
                println!("{trials},{p},{r},{s},{},{}", b.lower, b.upper);
            }
        }
        TheoryOp::Rate => {
            let kind_name = need(a.kind, "kind")?;
            let kind = RateKind::parse(&kind_name)
                .with_context(|| format!("unknown rate kind `{kind_name}`"))?;
            let n = need(a.n, "n")?;
            let budget = need(a.budget, "budget")?;
            let lambda = need(a.lambda, "lambda")?;
            println!("kind,n,budget,lambda,rate");
            println!(
                "{},{n},{budget},{lambda},{}",
                kind.name(),
                rate_curve(kind, n, budget, lambda)?
            );
        }
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> anyhow::Result<()> {
    let kind: ExperimentKind = a.kind.into();
    let mut spec = match &a.config {
        Some(p) => ExperimentSpec::from_file(p, kind)?,
        None => ExperimentSpec::defaults(kind),
    };
    if a.full {
        spec = spec.full_scale();
    }
    for s in &a.sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        spec.set(k, v)?;
    }
    let flags = [
        ("n", &a.n),
        ("alpha", &a.alpha),
        ("budget", &a.budget),
        ("lambda", &a.lambda),
        ("model", &a.model),
        ("replicates", &a.replicates),
        ("seed", &a.seed),
        ("estimators", &a.estimators),
        ("stages", &a.stages),
        ("lambda_hat", &a.lambda_hat),
        ("threshold_scale", &a.threshold_scale),
        ("workers", &a.workers),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            spec.set(k, v)?;
        }
    }
    for (slot, v) in [
        (&mut spec.out, a.out),
        (&mut spec.summary, a.summary),
        (&mut spec.timings, a.timings),
        (&mut spec.regions_dir, a.regions_dir),
    ] {
        if v.is_some() {
            *slot = v;
        }
    }
    let result = run_experiment(&spec)?;
    write_outputs(&spec, &result)?;
    if spec.out.is_none() {
        output::write_rows(&result.rows, std::io::stdout().lock())?;
    }
    let summary = output::summarize(&result.rows)?;
    let slope = match spec.kind {
        ExperimentKind::ScalingN if spec.ns.len() > 1 => Some(("n", slope_vs_n(&summary, "ms"))),
        ExperimentKind::ScalingBudget if spec.budgets.len() > 1 => {
            Some(("1/alpha", slope_vs_inverse_alpha(&summary, "ms")))
        }
        _ => None,
    };
    if let Some((axis, Ok(s))) = slope {
        eprintln!("log-log slope of mean d_kt (ms) vs {axis}: {s:.4}");
    }
    Ok(())
}
