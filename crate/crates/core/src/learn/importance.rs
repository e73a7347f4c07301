use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Dataset, Forest};
use crate::seeds;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub name: String,
    /// Mean increase in out-of-bag MSE over trees, unscaled.
    pub score: f64,
    /// Standard error of that mean across trees.
    pub se: f64,
}

/// Permutation importance with permutations drawn from streams keyed by
/// `(seed, tree, variable)`.
pub fn permutation_importance(forest: &Forest, data: &Dataset, seed: u64) -> Vec<Importance> {
    permutation_importance_with(forest, data, |tree, var, n| {
        let mut rng = seeds::stream(seeds::derive(seed, "permute", tree as u64), "variable", var as u64);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        perm
    })
}

/// Permutation importance with a caller-supplied permuter. For tree `t`
/// and variable `j`, `permuter(t, j, m)` returns a permutation of the `m`
/// out-of-bag rows of tree `t` (in ascending row order).
pub fn permutation_importance_with<P>(forest: &Forest, data: &Dataset, permuter: P) -> Vec<Importance>
where
    P: Fn(usize, usize, usize) -> Vec<usize> + Sync,
{
    assert_eq!(data.n_rows(), forest.n_train, "forest was trained on a different table");
    let p = data.n_vars();
    let per_tree: Vec<Option<Vec<f64>>> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, tree)| {
            let oob: Vec<usize> = (0..data.n_rows()).filter(|&i| !tree.in_bag(i)).collect();
            if oob.is_empty() {
                return None;
            }
            let m = oob.len() as f64;
            let base: f64 = oob
                .iter()
                .map(|&i| (data.response[i] - tree.predict(&data.rows[i])).powi(2))
                .sum::<f64>()
                / m;
            let diffs = (0..p)
                .map(|j| {
                    let perm = permuter(t, j, oob.len());
                    assert_eq!(perm.len(), oob.len(), "permutation length");
                    let permuted: f64 = oob
                        .iter()
                        .zip(&perm)
                        .map(|(&i, &k)| {
                            let donor = data.rows[oob[k]][j];
                            let pred = tree.predict_with(|v| if v == j { donor } else { data.rows[i][v] });
                            (data.response[i] - pred).powi(2)
                        })
                        .sum::<f64>()
                        / m;
                    permuted - base
                })
                .collect();
            Some(diffs)
        })
        .collect();

    let used: Vec<&Vec<f64>> = per_tree.iter().flatten().collect();
    let k = used.len() as f64;
    (0..p)
        .map(|j| {
            let (score, se) = if used.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = used.iter().map(|d| d[j]).sum::<f64>() / k;
                let var = if used.len() > 1 {
                    used.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                (mean, (var / k).sqrt())
            };
            Importance {
                name: data.names[j].clone(),
                score,
                se,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{fit_random_forest, ForestParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn signal_table(seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let names: Vec<String> = (0..11).map(|j| if j == 0 { "signal".into() } else { format!("noise{j}") }).collect();
        let rows: Vec<Vec<f64>> = (0..150).map(|_| (0..11).map(|_| rng.random::<f64>()).collect()).collect();
        let y = rows.iter().map(|r| 2.0 * r[0] + noise.sample(&mut rng)).collect();
        Dataset::continuous(&names.iter().map(String::as_str).collect::<Vec<_>>(), rows, y).unwrap()
    }

    #[test]
    fn signal_ranks_first() {
        let d = signal_table(1);
        let f = fit_random_forest(&d, &ForestParams { ntree: 200, ..Default::default() }, 5).unwrap();
        let imp = permutation_importance(&f, &d, 9);
        let top = imp.iter().max_by(|a, b| a.score.total_cmp(&b.score)).unwrap();
        assert_eq!(top.name, "signal");
    }

    #[test]
    fn identity_permutation_scores_zero() {
        let d = signal_table(2);
        let f = fit_random_forest(&d, &ForestParams { ntree: 30, ..Default::default() }, 5).unwrap();
        let imp = permutation_importance_with(&f, &d, |_, _, n| (0..n).collect());
        assert!(imp.iter().all(|i| i.score == 0.0));
    }

    #[test]
    fn noise_variable_is_near_zero() {
        let mut scores = Vec::new();
        for seed in 0..50 {
            let d = signal_table(100 + seed);
            let f = fit_random_forest(&d, &ForestParams { ntree: 60, ..Default::default() }, seed).unwrap();
            scores.push(permutation_importance(&f, &d, seed)[5].score);
        }
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(mean.abs() <= 2.0 * sd / n.sqrt() + 1e-12, "mean {mean}, sd {sd}");
    }

    #[test]
    fn deterministic_across_workers() {
        let d = signal_table(3);
        let f = fit_random_forest(&d, &ForestParams { ntree: 40, ..Default::default() }, 5).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| permutation_importance(&f, &d, 4))
        };
        assert_eq!(run(1), run(3));
    }
}
