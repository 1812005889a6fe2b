//! Closed-form information quantities: Bernoulli and model KL divergences,
//! binomial tail bounds, and reference rate curves.

use rand_distr::{Binomial, Distribution};

use crate::error::{ensure_same_len, Error, Result};
use crate::model::SamplingModel;
use crate::perm::{kendall_tau, Permutation};
use crate::seed::rng_from_seed;

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::out_of_range(name, v, "0 < value < 1"))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 0.5 {
        Ok(())
    } else {
        Err(Error::out_of_range("lambda", lambda, "0 < lambda < 1/2"))
    }
}

/// `KL(Ber(p) ‖ Ber(q))` in nats.
pub fn bernoulli_kl(p: f64, q: f64) -> Result<f64> {
    open_unit("p", p)?;
    open_unit("q", q)?;
    Ok(p * (p / q).ln() + (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailBounds {
    /// Bound on `P(X ≤ rN)`.
    pub lower: f64,
    /// Bound on `P(X ≥ sN)`.
    pub upper: f64,
}

/// Chernoff-type bounds for `X ~ Bin(N, p)`:
/// `P(X ≤ rN) ≤ exp(−N(p−r)²/(2p(1−r)))` and
/// `P(X ≥ sN) ≤ exp(−N(s−p)²/(2s(1−p)))`.
pub fn binomial_tail_bounds(trials: u64, p: f64, r: f64, s: f64) -> Result<TailBounds> {
    if !(0.0 < r && r < p && p < s && s < 1.0) {
        return Err(Error::Precondition(format!(
            "need 0 < r < p < s < 1, got r = {r}, p = {p}, s = {s}"
        )));
    }
    let nf = trials as f64;
    Ok(TailBounds {
        lower: (-nf * (p - r).powi(2) / (2.0 * p * (1.0 - r))).exp(),
        upper: (-nf * (s - p).powi(2) / (2.0 * s * (1.0 - p))).exp(),
    })
}

/// Monte-Carlo frequencies of `X ≤ rN` and `X ≥ sN` for `X ~ Bin(N, p)`.
pub fn empirical_binomial_tails(
    trials: u64,
    p: f64,
    r: f64,
    s: f64,
    draws: u64,
    seed: u64,
) -> Result<TailBounds> {
    open_unit("p", p)?;
    let dist = Binomial::new(trials, p)
        .map_err(|e| Error::Precondition(format!("binomial parameters: {e}")))?;
    let lo = r * trials as f64;
    let hi = s * trials as f64;
    let mut rng = rng_from_seed(seed);
    let (mut below, mut above) = (0u64, 0u64);
    for _ in 0..draws {
        let x = dist.sample(&mut rng) as f64;
        below += u64::from(x <= lo);
        above += u64::from(x >= hi);
    }
    Ok(TailBounds {
        lower: below as f64 / draws as f64,
        upper: above as f64 / draws as f64,
    })
}

/// `KL(P_π ‖ P_σ)` between the comparison-data laws under `M*_n(λ)`:
/// `2 d_KT(π,σ) p λ log((1+2λ)/(1−2λ))`, with `p = N / C(n,2)` under O₂.
pub fn model_kl(
    pi: &Permutation,
    sigma: &Permutation,
    model: SamplingModel,
    lambda: f64,
) -> Result<f64> {
    check_lambda(lambda)?;
    ensure_same_len(pi.len(), sigma.len())?;
    let n = pi.len();
    let rate = match model {
        SamplingModel::WithoutReplacement { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::out_of_range("p", p, "0 < p <= 1"));
            }
            p
        }
        SamplingModel::WithReplacement { budget } => {
            if n < 2 {
                return Err(Error::out_of_range("n", n, "n >= 2"));
            }
            budget as f64 / (n * (n - 1) / 2) as f64
        }
    };
    let d = kendall_tau(pi, sigma)? as f64;
    Ok(2.0 * d * rate * lambda * ((1.0 + 2.0 * lambda) / (1.0 - 2.0 * lambda)).ln())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateKind {
    /// `n/(pλ²)`
    MinimaxO1,
    /// `n³/(Nλ²)`
    MinimaxO2,
    /// `(n³/N) log n · log log n`
    MsUpper,
    /// `n/(p log(1/(1−2λ)))`
    LowerO1,
    /// `n³/(N log(1/(1−2λ)))`
    LowerO2,
}

impl RateKind {
    pub fn name(self) -> &'static str {
        match self {
            RateKind::MinimaxO1 => "minimax_o1",
            RateKind::MinimaxO2 => "minimax_o2",
            RateKind::MsUpper => "ms_upper",
            RateKind::LowerO1 => "lower_o1",
            RateKind::LowerO2 => "lower_o2",
        }
    }

    pub fn parse(s: &str) -> Option<RateKind> {
        [
            RateKind::MinimaxO1,
            RateKind::MinimaxO2,
            RateKind::MsUpper,
            RateKind::LowerO1,
            RateKind::LowerO2,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateCurve {
    pub kind: RateKind,
    pub n: usize,
    /// `p` for the O₁ kinds, `N` otherwise.
    pub budget: f64,
    pub lambda: f64,
}

impl RateCurve {
    /// Rate value capped at the diameter `C(n,2)`.
    pub fn evaluate(&self) -> Result<f64> {
        rate_curve(self.kind, self.n, self.budget, self.lambda)
    }
}

pub fn rate_curve(kind: RateKind, n: usize, budget: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if budget.is_nan() || budget < 0.0 {
        return Err(Error::out_of_range("budget", budget, "budget >= 0"));
    }
    let nf = n as f64;
    let cap = nf * (nf - 1.0).max(0.0) / 2.0;
    let lower_log = (1.0 / (1.0 - 2.0 * lambda)).ln();
    let raw = match kind {
        RateKind::MinimaxO1 => nf / (budget * lambda * lambda),
        RateKind::MinimaxO2 => nf.powi(3) / (budget * lambda * lambda),
        RateKind::MsUpper => {
            let ll = nf.ln().ln().max(0.0);
            nf.powi(3) / budget * nf.ln() * ll
        }
        RateKind::LowerO1 => nf / (budget * lower_log),
        RateKind::LowerO2 => nf.powi(3) / (budget * lower_log),
    };
    Ok(if raw.is_nan() { cap } else { raw.min(cap) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn bernoulli_kl_examples() {
        assert_eq!(bernoulli_kl(0.3, 0.3).unwrap(), 0.0);
        assert!(close(
            bernoulli_kl(0.75, 0.25).unwrap(),
            0.5 * 3f64.ln(),
            1e-14
        ));
        assert!(bernoulli_kl(0.0, 0.5).is_err());
        assert!(bernoulli_kl(0.5, 1.0).is_err());
    }

    /// `KL(Ber(p)‖Ber(q)) = ∫_q^p (p − x)/(x(1 − x)) dx`.
    #[test]
    fn bernoulli_kl_matches_numeric_integral() {
        for &(p, q) in &[(0.75, 0.25), (0.6, 0.1), (0.2, 0.9)] {
            let steps = 200_000;
            let h = (p - q) / steps as f64;
            let f = |x: f64| (p - x) / (x * (1.0 - x));
            let mut acc = f(q) + f(p);
            for k in 1..steps {
                let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += w * f(q + k as f64 * h);
            }
            let integral = acc * h / 3.0;
            assert!(
                close(integral, bernoulli_kl(p, q).unwrap(), 1e-9),
                "{p} {q}"
            );
        }
    }

    #[test]
    fn bernoulli_kl_grid_properties() {
        let grid: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
        for &p in &grid {
            for &q in &grid {
                let kl = bernoulli_kl(p, q).unwrap();
                assert!(kl >= 0.0);
                if q < p {
                    assert!(kl >= (p - q).powi(2) / (2.0 * p * (1.0 - q)) - 1e-15);
                }
                let flipped = bernoulli_kl(1.0 - q, 1.0 - p).unwrap();
                assert!(close(bernoulli_kl(q, p).unwrap(), flipped, 1e-12));
            }
        }
    }

    #[test]
    fn tail_bound_examples() {
        let b = binomial_tail_bounds(1000, 0.5, 0.4, 0.6).unwrap();
        assert!(close(
            b.lower,
            (-1000.0f64 * 0.01 / (2.0 * 0.5 * 0.6)).exp(),
            1e-12
        ));
        let near = binomial_tail_bounds(1000, 0.5, 0.5 - 1e-9, 0.6).unwrap();
        assert!(near.lower > 0.999_999);
        assert!(binomial_tail_bounds(10, 0.5, 0.6, 0.7).is_err());
        assert!(binomial_tail_bounds(10, 0.5, 0.4, 1.0).is_err());
    }

    /// `X ≥ sN` for `Bin(N, p)` is `N − X ≤ (1−s)N` for `Bin(N, 1−p)`.
    #[test]
    fn upper_tail_is_flipped_lower_tail() {
        for &(n, p, s) in &[(100u64, 0.5, 0.7), (500, 0.3, 0.45), (50, 0.8, 0.9)] {
            let up = binomial_tail_bounds(n, p, p / 2.0, s).unwrap().upper;
            let q = 1.0 - p;
            let low = binomial_tail_bounds(n, q, 1.0 - s, (1.0 + q) / 2.0)
                .unwrap()
                .lower;
            assert!(close(up, low, 1e-12));
        }
    }

    #[test]
    fn empirical_tails_respect_bounds() {
        let b = binomial_tail_bounds(100, 0.5, 0.35, 0.65).unwrap();
        let e = empirical_binomial_tails(100, 0.5, 0.35, 0.65, 100_000, 2).unwrap();
        assert!(e.lower <= b.lower && e.upper <= b.upper);
        assert!(e.lower > 0.0);
    }

    #[test]
    fn model_kl_examples() {
        let id = Permutation::identity(5);
        let o1 = SamplingModel::WithoutReplacement { p: 1.0 };
        assert_eq!(model_kl(&id, &id, o1, 0.25).unwrap(), 0.0);
        let swap = Permutation::from_one_based(&[2, 1, 3, 4, 5]).unwrap();
        let v = model_kl(&swap, &id, o1, 0.25).unwrap();
        assert!(close(v, 0.5 * 3f64.ln(), 1e-14));
        assert!(close(v, bernoulli_kl(0.75, 0.25).unwrap(), 1e-14));
        let o2 = SamplingModel::WithReplacement { budget: 4 };
        let o1_eq = SamplingModel::WithoutReplacement { p: 0.4 };
        assert!(close(
            model_kl(&swap, &id, o2, 0.2).unwrap(),
            model_kl(&swap, &id, o1_eq, 0.2).unwrap(),
            1e-14
        ));
        assert!(model_kl(&swap, &id, o1, 0.5).is_err());
    }

    /// Oracle: sum over pairs of the per-comparison Bernoulli KL.
    #[test]
    fn model_kl_matches_pairwise_sum() {
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let n = 2 + (rand::Rng::random_range(&mut rng, 0..7usize));
            let pi = Permutation::random(n, &mut rng);
            let sigma = Permutation::random(n, &mut rng);
            let lambda = rand::Rng::random_range(&mut rng, 0.01..0.49);
            let p = rand::Rng::random_range(&mut rng, 0.05..1.0);
            let win = |perm: &Permutation, i: usize, j: usize| {
                if perm.rank(i) > perm.rank(j) {
                    0.5 + lambda
                } else {
                    0.5 - lambda
                }
            };
            let mut per_pair = 0.0;
            for i in 0..n {
                for j in i + 1..n {
                    per_pair += bernoulli_kl(win(&pi, i, j), win(&sigma, i, j)).unwrap();
                }
            }
            let o1 =
                model_kl(&pi, &sigma, SamplingModel::WithoutReplacement { p }, lambda).unwrap();
            assert!(close(o1, p * per_pair, 1e-12) || (o1 == 0.0 && per_pair == 0.0));
            let budget = 37;
            let pairs = (n * (n - 1) / 2) as f64;
            let per_draw = per_pair / pairs;
            let o2 = model_kl(
                &pi,
                &sigma,
                SamplingModel::WithReplacement { budget },
                lambda,
            )
            .unwrap();
            assert!(close(o2, budget as f64 * per_draw, 1e-12) || (o2 == 0.0 && per_draw == 0.0));
        }
    }

    #[test]
    fn rate_curves() {
        let cap = (100.0 * 99.0) / 2.0;
        let a = rate_curve(RateKind::MinimaxO1, 100, 1.0, 0.25).unwrap();
        let b = rate_curve(RateKind::MinimaxO1, 200, 1.0, 0.25).unwrap();
        assert!(close(b / a, 2.0, 1e-12));
        for kind in [
            RateKind::MinimaxO1,
            RateKind::MinimaxO2,
            RateKind::MsUpper,
            RateKind::LowerO1,
            RateKind::LowerO2,
        ] {
            assert_eq!(rate_curve(kind, 100, 0.0, 0.25).unwrap(), cap);
            let v = rate_curve(kind, 100, 1e4, 0.25).unwrap();
            assert!(v >= 0.0 && v <= cap);
            assert_eq!(RateKind::parse(kind.name()), Some(kind));
        }
        let n = 10_000f64;
        let budget = 0.1 * n * (n - 1.0) / 2.0;
        let ms = rate_curve(RateKind::MsUpper, 10_000, budget, 0.25).unwrap();
        let direct = n.powi(3) / budget * n.ln() * n.ln().ln();
        assert!(close(ms, direct, 1e-12));
        assert_eq!(rate_curve(RateKind::MsUpper, 1, 10.0, 0.25).unwrap(), 0.0);
    }
}
