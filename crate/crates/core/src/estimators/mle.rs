use crate::combinatorics::PackingSet;
use crate::error::{ensure_same_len, Error, Result};
use crate::model::{ComparisonDataset, SamplingModel};
use crate::perm::{enumerate_permutations_capped, Permutation, DEFAULT_ENUMERATION_CAP};

/// `Σ_{π(i) > π(j)} A_ij`: wins agreeing with the order `π`.
pub fn mle_objective(dataset: &ComparisonDataset, pi: &Permutation) -> Result<u64> {
    ensure_same_len(dataset.n(), pi.len())?;
    let mut total = 0u64;
    for i in 0..dataset.n() {
        let ri = pi.rank(i);
        for (j, a, _) in dataset.row(i) {
            if ri > pi.rank(j) {
                total += a as u64;
            }
        }
    }
    Ok(total)
}

fn argmax<'a>(
    dataset: &ComparisonDataset,
    candidates: impl Iterator<Item = &'a Permutation>,
) -> Result<Option<Permutation>> {
    let mut best: Option<(u64, &Permutation)> = None;
    for pi in candidates {
        let v = mle_objective(dataset, pi)?;
        let better = match best {
            None => true,
            Some((bv, bp)) => v > bv || (v == bv && pi.as_slice() < bp.as_slice()),
        };
        if better {
            best = Some((v, pi));
        }
    }
    Ok(best.map(|(_, p)| p.clone()))
}

/// Lexicographically first maximizer of [`mle_objective`] over all of `𝔖_n`.
pub fn brute_force_mle(dataset: &ComparisonDataset) -> Result<Permutation> {
    brute_force_mle_capped(dataset, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_mle_capped(dataset: &ComparisonDataset, cap: usize) -> Result<Permutation> {
    let n = dataset.n();
    let mut best: Option<(u64, Permutation)> = None;
    // lexicographic scan, so strict improvement keeps the first maximizer
    for pi in enumerate_permutations_capped(n, cap)? {
        let v = mle_objective(dataset, &pi)?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, pi));
        }
    }
    Ok(best.expect("n >= 1 gives a nonempty scan").1)
}

/// Lexicographically first maximizer of [`mle_objective`] over a net.
pub fn sieve_mle(dataset: &ComparisonDataset, net: &PackingSet) -> Result<Permutation> {
    ensure_same_len(dataset.n(), net.n)?;
    argmax(dataset, net.members.iter())?
        .ok_or_else(|| Error::Precondition("sieve net has no members".into()))
}

/// Net radius `φ = n/(pλ²)` under O₁ and `n³/(Nλ²)` under O₂.
pub fn theoretical_phi(model: SamplingModel, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(Error::out_of_range("lambda", lambda, "0 < lambda < 1/2"));
    }
    let nf = n as f64;
    Ok(match model {
        SamplingModel::WithoutReplacement { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::out_of_range("p", p, "0 < p <= 1"));
            }
            nf / (p * lambda * lambda)
        }
        SamplingModel::WithReplacement { budget } => {
            if budget == 0 {
                return Err(Error::out_of_range("N", budget, "N >= 1"));
            }
            nf.powi(3) / (budget as f64 * lambda * lambda)
        }
    })
}

/// `φ` clamped to `[1, C(n,2)]` and rounded down to an integer radius.
pub fn clamp_phi(phi: f64, n: usize) -> u64 {
    let diameter = (n * n.saturating_sub(1) / 2) as u64;
    (phi.floor().max(1.0) as u64).min(diameter.max(1))
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::combinatorics::{greedy_maximal_packing, Universe};
    use crate::model::{sample_with_replacement, ProbabilityMatrix};
    use crate::perm::{compose, enumerate_permutations, kendall_tau};
    use crate::seed::rng_from_seed;
    use proptest::prelude::*;

    fn noise_free(pi: &Permutation) -> ComparisonDataset {
        let n = pi.len();
        let mut w = vec![vec![0; n]; n];
        for i in 0..n {
            for j in 0..n {
                if pi.rank(i) > pi.rank(j) {
                    w[i][j] = 1;
                }
            }
        }
        ComparisonDataset::from_win_matrix(&w, SamplingModel::WithoutReplacement { p: 1.0 }, 0)
            .unwrap()
    }

    fn empty(n: usize) -> ComparisonDataset {
        ComparisonDataset::from_win_matrix(
            &vec![vec![0; n]; n],
            SamplingModel::WithoutReplacement { p: 1.0 },
            0,
        )
        .unwrap()
    }

    fn noisy(n: usize, seed: u64) -> ComparisonDataset {
        let pi = Permutation::random(n, &mut rng_from_seed(seed));
        let m = ProbabilityMatrix::star(n, 0.1).unwrap();
        sample_with_replacement(&pi, &m, 40, seed).unwrap()
    }

    #[test]
    fn objective_examples() {
        let e = empty(5);
        for pi in enumerate_permutations(5).unwrap() {
            assert_eq!(mle_objective(&e, &pi).unwrap(), 0);
        }
        let d = noisy(7, 3);
        let rev = Permutation::reverse(7);
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            let pi = Permutation::random(7, &mut rng);
            let flipped = compose(&rev, &pi).unwrap();
            assert_eq!(
                mle_objective(&d, &pi).unwrap() + mle_objective(&d, &flipped).unwrap(),
                d.total_wins()
            );
        }
        assert!(mle_objective(&d, &Permutation::identity(6)).is_err());
    }

    #[test]
    fn noise_free_maximizer_is_unique() {
        let mut rng = rng_from_seed(4);
        for n in 2..=7 {
            let truth = Permutation::random(n, &mut rng);
            let d = noise_free(&truth);
            let best = mle_objective(&d, &truth).unwrap();
            let at_max = enumerate_permutations(n)
                .unwrap()
                .filter(|p| mle_objective(&d, p).unwrap() == best)
                .count();
            assert_eq!(at_max, 1);
            assert_eq!(brute_force_mle(&d).unwrap(), truth);
        }
    }

    #[test]
    fn brute_force_examples() {
        assert!(brute_force_mle(&empty(5)).unwrap().is_identity());
        assert!(brute_force_mle_capped(&empty(5), 4).is_err());
    }

    #[test]
    fn sieve_examples() {
        let d = noisy(6, 9);
        let single = PackingSet {
            n: 6,
            epsilon: 15,
            members: vec![Permutation::identity(6)],
        };
        assert!(sieve_mle(&d, &single).unwrap().is_identity());
        let none = PackingSet {
            n: 6,
            epsilon: 15,
            members: vec![],
        };
        assert!(sieve_mle(&d, &none).is_err());
        let full = greedy_maximal_packing(6, 0, &Universe::All).unwrap();
        assert_eq!(sieve_mle(&d, &full).unwrap(), brute_force_mle(&d).unwrap());
    }

    #[test]
    fn sieve_error_within_net_radius_on_exact_data() {
        let mut rng = rng_from_seed(12);
        for phi in [1, 2, 4, 7] {
            let net = greedy_maximal_packing(6, phi, &Universe::All).unwrap();
            for _ in 0..5 {
                let truth = Permutation::random(6, &mut rng);
                let est = sieve_mle(&noise_free(&truth), &net).unwrap();
                assert!(kendall_tau(&est, &truth).unwrap() <= phi);
            }
        }
    }

    #[test]
    fn phi_formula() {
        let v = theoretical_phi(SamplingModel::WithReplacement { budget: 1000 }, 10, 0.25).unwrap();
        assert!((v - 16.0).abs() < 1e-12);
        let v = theoretical_phi(SamplingModel::WithoutReplacement { p: 1.0 }, 10, 0.25).unwrap();
        assert!((v - 160.0).abs() < 1e-9);
        let a = theoretical_phi(SamplingModel::WithReplacement { budget: 100 }, 10, 0.2).unwrap();
        let b = theoretical_phi(SamplingModel::WithReplacement { budget: 200 }, 10, 0.2).unwrap();
        let c = theoretical_phi(SamplingModel::WithReplacement { budget: 200 }, 10, 0.3).unwrap();
        assert!(a > b && b > c);
        assert!(theoretical_phi(SamplingModel::WithReplacement { budget: 200 }, 10, 0.5).is_err());
        assert_eq!(clamp_phi(0.2, 6), 1);
        assert_eq!(clamp_phi(160.0, 6), 15);
        assert_eq!(clamp_phi(7.9, 6), 7);
    }

    proptest! {
        #[test]
        fn objective_matches_matrix_traversal(seed in any::<u64>(), n in 2usize..12) {
            let d = noisy(n, seed);
            let pi = Permutation::random(n, &mut rng_from_seed(seed ^ 1));
            let mut brute = 0u64;
            for i in 0..n {
                for j in 0..n {
                    if pi.rank(i) > pi.rank(j) {
                        brute += d.wins(i, j) as u64;
                    }
                }
            }
            prop_assert_eq!(mle_objective(&d, &pi).unwrap(), brute);
        }

        #[test]
        fn zero_net_sieve_equals_brute_force(seed in any::<u64>()) {
            let d = noisy(6, seed);
            let full = greedy_maximal_packing(6, 0, &Universe::All).unwrap();
            prop_assert_eq!(sieve_mle(&d, &full).unwrap(), brute_force_mle(&d).unwrap());
        }
    }
}
