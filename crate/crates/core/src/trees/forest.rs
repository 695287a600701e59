use rand::{Rng, RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use super::boost::base_margin;
use super::grow::{grow_tree, FeatureSampling, GrowParams};
use super::split::{SplitParams, SplitRule};
use super::{prepare, Ensemble, ModelKind, TrainConfig};
use crate::error::Result;
use crate::ingest::FeatureMatrix;
use crate::scalar::Scalar;

/// Random forest of gini classification trees.
///
/// Tree `t` draws its rows from a generator seeded with `seed + t`: with
/// `bootstrap`, `round(subsample_rows * n)` draws with replacement (a row's
/// multiplicity becomes its weight); without, a uniform subset of that size
/// (all rows when `subsample_rows == 1`). Nodes see a fresh random subset of
/// `ceil(subsample_features * n_features)` features.
pub fn train_rf<F: Scalar>(matrix: &FeatureMatrix<F>, config: &TrainConfig) -> Result<Ensemble<F>> {
    let (binned, workers) = prepare(matrix, config)?;
    let n = matrix.n_rows;
    let base = base_margin::<F>(&matrix.labels)?;
    let mut ensemble = Ensemble::empty(ModelKind::Rf, matrix, &binned, config, F::one(), base);
    let draws = ((config.subsample_rows * n as f64).round() as usize).clamp(1, n);
    let mut weight = vec![0u32; n];
    let mut grad = vec![F::zero(); n];
    let mut hess = vec![F::zero(); n];
    for t in 0..config.n_trees {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(config.seed.wrapping_add(t as u64));
        weight.fill(0);
        if config.bootstrap {
            for _ in 0..draws {
                weight[rng.gen_range(0..n)] += 1;
            }
        } else if draws == n {
            weight.fill(1);
        } else {
            for r in rand::seq::index::sample(&mut rng, n, draws) {
                weight[r] = 1;
            }
        }
        let mut rows = Vec::with_capacity(draws);
        for r in 0..n {
            let w = F::from_u32(weight[r]).expect("weight fits");
            hess[r] = w;
            grad[r] = if matrix.labels[r] { w } else { F::zero() };
            if weight[r] > 0 {
                rows.push(r as u32);
            }
        }
        let params = GrowParams {
            max_depth: config.max_depth,
            max_leaves: config.max_leaves,
            split: SplitParams {
                rule: SplitRule::Gini {
                    min_decrease: F::from_f64_lossy(config.gamma),
                },
                min_child_weight: F::from_f64_lossy(config.min_child_weight),
            },
            features: (config.subsample_features < 1.0).then(|| FeatureSampling {
                fraction: config.subsample_features,
                seed: rng.next_u64(),
            }),
        };
        let grown = grow_tree(&binned, rows, &grad, &hess, &params, &workers)?;
        ensemble.trees.push(grown.tree);
    }
    Ok(ensemble)
}
