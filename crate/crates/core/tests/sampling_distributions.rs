use noisy_sort::model::{sample_with_replacement, sample_without_replacement};
use noisy_sort::seed::{derive_seed, rng_from_seed};
use noisy_sort::{ComparisonDataset, Permutation, ProbabilityMatrix};
use proptest::prelude::*;

const Z_99: f64 = 2.326_347_874;

/// Upper 1% quantile of chi-square with `k` degrees of freedom
/// (Wilson–Hilferty).
fn chi2_crit_99(k: f64) -> f64 {
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + Z_99 * a.sqrt()).powi(3)
}

fn random_truth(n: usize, seed: u64) -> Permutation {
    Permutation::random(n, &mut rng_from_seed(seed))
}

/// Pearson statistic of `A_ij` against `Bin(N_ij, 1/2 + λ)` over all pairs
/// with `i` stronger than `j`.
fn conditional_win_statistic(ds: &ComparisonDataset, pi: &Permutation, lambda: f64) -> (f64, f64) {
    let n = ds.n();
    let p = 0.5 + lambda;
    let (mut stat, mut df) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if pi.rank(i) <= pi.rank(j) {
                continue;
            }
            let trials = ds.count(i, j) as f64;
            if trials == 0.0 {
                continue;
            }
            let a = ds.wins(i, j) as f64;
            stat += (a - trials * p).powi(2) / (trials * p * (1.0 - p));
            df += 1.0;
        }
    }
    (stat, df)
}

/// Pearson statistic of the pair counts against the uniform multinomial.
fn pair_count_statistic(ds: &ComparisonDataset) -> (f64, f64) {
    let n = ds.n();
    let cells = (n * (n - 1) / 2) as f64;
    let expected = ds.total_comparisons() as f64 / cells;
    let mut stat = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            stat += (ds.count(i, j) as f64 - expected).powi(2) / expected;
        }
    }
    (stat, cells - 1.0)
}

#[test]
fn wins_given_counts_are_binomial() {
    let (n, budget, lambda) = (20, 100_000, 0.25);
    let m = ProbabilityMatrix::star(n, lambda).unwrap();
    let mut rejections = 0;
    for s in 0..20 {
        let pi = random_truth(n, s);
        let ds = sample_with_replacement(&pi, &m, budget, derive_seed(77, s)).unwrap();
        let (stat, df) = conditional_win_statistic(&ds, &pi, lambda);
        assert_eq!(df, 190.0);
        if stat > chi2_crit_99(df) {
            rejections += 1;
        }
    }
    // P(Bin(20, 0.01) >= 3) is about 0.1%
    assert!(rejections <= 2, "{rejections} rejections at the 1% level");
}

#[test]
fn pair_counts_are_uniform_multinomial() {
    let (n, budget) = (20, 100_000);
    let m = ProbabilityMatrix::star(n, 0.25).unwrap();
    let pi = Permutation::identity(n);
    let mut rejections = 0;
    for s in 0..20 {
        let ds = sample_with_replacement(&pi, &m, budget, derive_seed(91, s)).unwrap();
        let (stat, df) = pair_count_statistic(&ds);
        if stat > chi2_crit_99(df) {
            rejections += 1;
        }
    }
    assert!(rejections <= 2, "{rejections} rejections at the 1% level");
}

#[test]
fn a_wrong_win_probability_is_rejected() {
    let (n, budget) = (20, 100_000);
    let m = ProbabilityMatrix::star(n, 0.25).unwrap();
    let pi = random_truth(n, 3);
    let ds = sample_with_replacement(&pi, &m, budget, 5).unwrap();
    let (stat, df) = conditional_win_statistic(&ds, &pi, 0.2);
    assert!(stat > chi2_crit_99(df));
}

#[test]
fn both_models_match_per_pair_expected_counts() {
    // p·C(n,2) = N
    let n = 30;
    let pairs = n * (n - 1) / 2;
    let p = 0.2;
    let budget = (p * pairs as f64) as u64;
    let reps = 400;
    let m = ProbabilityMatrix::star(n, 0.25).unwrap();
    let pi = Permutation::identity(n);
    let mut sum1 = vec![0.0; pairs];
    let mut sum2 = vec![0.0; pairs];
    for s in 0..reps {
        let d1 = sample_without_replacement(&pi, &m, p, derive_seed(5, s)).unwrap();
        let d2 = sample_with_replacement(&pi, &m, budget, derive_seed(6, s)).unwrap();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                assert!(d1.count(i, j) <= 1);
                sum1[k] += d1.count(i, j) as f64;
                sum2[k] += d2.count(i, j) as f64;
                k += 1;
            }
        }
    }
    let r = reps as f64;
    let q = 1.0 / pairs as f64;
    let var1 = p * (1.0 - p) / r;
    let var2 = budget as f64 * q * (1.0 - q) / r;
    let stat: f64 = sum1
        .iter()
        .zip(&sum2)
        .map(|(a, b)| (a / r - b / r).powi(2) / (var1 + var2))
        .sum();
    assert!(
        stat < chi2_crit_99(pairs as f64),
        "statistic {stat} over {pairs} pairs"
    );
    let mean1 = sum1.iter().sum::<f64>() / (r * pairs as f64);
    let mean2 = sum2.iter().sum::<f64>() / (r * pairs as f64);
    assert!((mean1 - p).abs() < 4.0 * (var1 / pairs as f64).sqrt());
    assert!((mean2 - budget as f64 / pairs as f64).abs() < 1e-12);
}

fn check_invariants(ds: &ComparisonDataset) {
    let n = ds.n();
    let mut total = 0u64;
    for i in 0..n {
        assert_eq!(ds.wins(i, i), 0);
        assert_eq!(ds.count(i, i), 0);
        for j in 0..n {
            assert_eq!(ds.wins(i, j) + ds.wins(j, i), ds.count(i, j));
            assert_eq!(ds.count(i, j), ds.count(j, i));
            if i < j {
                total += ds.count(i, j) as u64;
            }
        }
    }
    assert_eq!(total, ds.total_comparisons());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_datasets_are_consistent(
        n in 2usize..40,
        lambda in 0.01f64..0.49,
        p in 0.05f64..1.0,
        budget in 1u64..3000,
        seed in any::<u64>(),
    ) {
        let m = ProbabilityMatrix::star(n, lambda).unwrap();
        let pi = random_truth(n, seed);
        let d1 = sample_without_replacement(&pi, &m, p, seed).unwrap();
        check_invariants(&d1);
        let d2 = sample_with_replacement(&pi, &m, budget, seed).unwrap();
        check_invariants(&d2);
        prop_assert_eq!(d2.total_comparisons(), budget);
        let again = sample_with_replacement(&pi, &m, budget, seed).unwrap();
        prop_assert_eq!(&again, &d2);
    }
}
