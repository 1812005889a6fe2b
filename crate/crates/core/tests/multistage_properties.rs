use noisy_sort::estimators::{ms_sort, MsConfig, Relation};
use noisy_sort::model::{split_with_replacement, stage_budgets};
use noisy_sort::seed::rng_from_seed;
use noisy_sort::{kendall_tau, ComparisonDataset, Permutation, ProbabilityMatrix};
use proptest::prelude::*;

fn stage_data(
    pi: &Permutation,
    lambda: f64,
    total: u64,
    t: usize,
    seed: u64,
) -> Vec<ComparisonDataset> {
    let m = ProbabilityMatrix::star(pi.len(), lambda).unwrap();
    split_with_replacement(pi, &m, total, &stage_budgets(total, t), seed).unwrap()
}

/// Truth after renaming item `i` to `rho.rank(i)`.
fn relabel_truth(pi: &Permutation, rho: &Permutation) -> Permutation {
    let mut image = vec![0; pi.len()];
    for i in 0..pi.len() {
        image[rho.rank(i)] = pi.rank(i);
    }
    Permutation::from_zero_based(image).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn relabelling_permutes_scores_and_sets(seed in any::<u64>()) {
        let n = 150;
        let t = 2;
        let mut rng = rng_from_seed(seed);
        let pi = Permutation::random(n, &mut rng);
        let rho = Permutation::random(n, &mut rng);
        let total = 3 * (n * (n - 1) / 2) as u64;
        let data = stage_data(&pi, 0.3, total, t, seed);
        let moved: Vec<_> = data.iter().map(|d| d.relabel(&rho).unwrap()).collect();
        let cfg = MsConfig { stages: t, ..Default::default() };
        let a = ms_sort(&data, 0.3, &cfg).unwrap();
        let b = ms_sort(&moved, 0.3, &cfg).unwrap();
        prop_assert!(a.final_state().region_size() < (n * n) as u64);
        for (sa, sb) in a.states.iter().zip(&b.states) {
            prop_assert_eq!(sa.region_size(), sb.region_size());
            prop_assert_eq!(sa.scores().len(), sb.scores().len());
            for i in 0..n {
                if !sa.scores().is_empty() {
                    prop_assert_eq!(sa.scores()[i], sb.scores()[rho.rank(i)]);
                }
                prop_assert_eq!(sa.gate_fired(i), sb.gate_fired(rho.rank(i)));
                for j in (0..n).step_by(5) {
                    prop_assert_eq!(sa.relation(i, j), sb.relation(rho.rank(i), rho.rank(j)));
                }
            }
        }
        // the estimates agree on every pair the final scores separate
        let fa = a.final_state().scores();
        for i in 0..n {
            for j in 0..n {
                if fa[i] < fa[j] {
                    prop_assert!(a.estimate.rank(i) < a.estimate.rank(j));
                    prop_assert!(b.estimate.rank(rho.rank(i)) < b.estimate.rank(rho.rank(j)));
                }
            }
        }
        let distinct = {
            let mut s = fa.to_vec();
            s.sort_by(f64::total_cmp);
            s.windows(2).all(|w| w[0] < w[1])
        };
        if distinct {
            let moved_truth = relabel_truth(&pi, &rho);
            prop_assert_eq!(
                kendall_tau(&a.estimate, &pi).unwrap(),
                kendall_tau(&b.estimate, &moved_truth).unwrap()
            );
        }
    }
}

#[test]
fn settled_pairs_are_correct_at_high_signal() {
    let n = 200;
    let t = 3;
    let total = 5 * (n * (n - 1) / 2) as u64;
    for seed in 0..5 {
        let pi = Permutation::random(n, &mut rng_from_seed(seed));
        let data = stage_data(&pi, 0.45, total, t, seed + 100);
        let cfg = MsConfig {
            stages: t,
            ..Default::default()
        };
        let out = ms_sort(&data, 0.45, &cfg).unwrap();
        assert!(out.final_state().region_size() < (n * n) as u64);
        for st in &out.states {
            for i in 0..n {
                for j in 0..n {
                    match st.relation(i, j) {
                        Relation::Below => assert!(pi.rank(j) < pi.rank(i)),
                        Relation::Above => assert!(pi.rank(j) > pi.rank(i)),
                        Relation::Uncertain => {}
                    }
                }
            }
        }
    }
}
