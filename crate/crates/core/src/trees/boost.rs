use super::grow::{grow_tree, GrowParams};
use super::split::{logistic_grad_hess, SplitParams, SplitRule};
use super::{prepare, Ensemble, ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::scalar::{logit, Scalar};

/// Base rates are clamped to `[BASE_RATE_CLAMP, 1 - BASE_RATE_CLAMP]` so
/// single-class data still gets a finite initial margin.
const BASE_RATE_CLAMP: f64 = 1e-6;

/// Log-odds of the positive fraction of `labels`.
pub(crate) fn base_margin<F: Scalar>(labels: &[bool]) -> Result<F> {
    if labels.is_empty() {
        return Err(Error::Validation("cannot train on zero rows".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    let p = pos.clamp(BASE_RATE_CLAMP, 1.0 - BASE_RATE_CLAMP);
    Ok(F::from_f64_lossy(logit(p)))
}

/// Second-order boosting on the logistic loss: trees are fit to per-row
/// gradients and hessians with regularized gain and `-G/(H+λ)` leaves.
pub fn train_xgb<F: Scalar>(matrix: &FeatureMatrix<F>, config: &TrainConfig) -> Result<Ensemble<F>> {
    boost(matrix, config, ModelKind::Xgb, |_, _| {})
}

/// First-order gradient boosting: as [`train_xgb`] with every hessian fixed
/// to 1, so gains and leaf values reduce to squared-residual form.
pub fn train_gbt<F: Scalar>(matrix: &FeatureMatrix<F>, config: &TrainConfig) -> Result<Ensemble<F>> {
    boost(matrix, config, ModelKind::Gbt, |_, _| {})
}

/// `on_round` sees the ensemble and the incrementally maintained training
/// margins after every round.
fn boost<F: Scalar>(
    matrix: &FeatureMatrix<F>,
    config: &TrainConfig,
    kind: ModelKind,
    mut on_round: impl FnMut(&Ensemble<F>, &[F]),
) -> Result<Ensemble<F>> {
    let (binned, workers) = prepare(matrix, config)?;
    let base = base_margin::<F>(&matrix.labels)?;
    let lr = F::from_f64_lossy(config.learning_rate);
    let params = GrowParams {
        max_depth: config.max_depth,
        max_leaves: config.max_leaves,
        split: SplitParams {
            rule: SplitRule::Regularized {
                lambda: F::from_f64_lossy(config.lambda),
                gamma: F::from_f64_lossy(config.gamma),
            },
            min_child_weight: F::from_f64_lossy(config.min_child_weight),
        },
        features: None,
    };
    let n = matrix.n_rows;
    let mut ensemble = Ensemble::empty(kind, matrix, &binned, config, lr, base);
    let mut margins = vec![base; n];
    let mut grad = vec![F::zero(); n];
    let mut hess = vec![F::one(); n];
    for _ in 0..config.n_trees {
        for r in 0..n {
            let (g, h) = logistic_grad_hess(margins[r], matrix.labels[r]);
            grad[r] = g;
            if kind == ModelKind::Xgb {
                hess[r] = h;
            }
        }
        let all_rows = (0..n as u32).collect();
        let grown = grow_tree(&binned, all_rows, &grad, &hess, &params, &workers)?;
        grown.for_each_row(|r, w| margins[r] = margins[r] + lr * w);
        ensemble.trees.push(grown.tree);
        on_round(&ensemble, &margins);
    }
    Ok(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trees::grow::Node;

    fn separable() -> FeatureMatrix<f64> {
        FeatureMatrix::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            &[false, false, true, true],
        )
        .unwrap()
    }

    /// 20 rows, 2 features; labels depend on both features with some noise.
    pub(crate) fn crafted() -> FeatureMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 10) as f64, (i * 3 % 7) as f64]).collect();
        let labels: Vec<bool> = (0..20).map(|i| (i % 10) >= 4 || (i * 3 % 7) == 0).collect();
        FeatureMatrix::from_rows(&rows, &labels).unwrap()
    }

    #[test]
    fn no_trees_predicts_base_rate() {
        let m = crafted();
        let c = TrainConfig {
            n_trees: 0,
            ..Default::default()
        };
        for model in [train_xgb(&m, &c).unwrap(), train_gbt(&m, &c).unwrap()] {
            let p = m.positives() as f64 / 20.0;
            for s in model.predict(&m).unwrap() {
                assert!((s - p).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stump_separates_four_rows() {
        let m = separable();
        let c = TrainConfig {
            n_trees: 1,
            max_depth: 1,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let model = train_xgb(&m, &c).unwrap();
        let scores = model.predict(&m).unwrap();
        let correct = scores.iter().zip(&m.labels).filter(|(s, &l)| (**s >= 0.5) == l).count();
        assert_eq!(correct, 4);
        assert_eq!(model.trees[0].nodes.len(), 3);
    }

    #[test]
    fn worker_count_does_not_change_the_model() {
        let m = crafted();
        let c = TrainConfig {
            n_trees: 5,
            min_child_weight: 0.0,
            ..Default::default()
        };
        let one = train_xgb(&m, &c).unwrap();
        let four = train_xgb(&m, &TrainConfig { n_workers: 4, ..c }).unwrap();
        assert_eq!(one.to_json().unwrap(), four.to_json().unwrap());
    }

    #[test]
    fn first_order_tree_differs_under_uneven_hessians() {
        let m = crafted();
        let c = TrainConfig {
            n_trees: 2,
            min_child_weight: 0.0,
            lambda: 0.0,
            ..Default::default()
        };
        let xgb = train_xgb(&m, &c).unwrap();
        let gbt = train_gbt(&m, &c).unwrap();
        // first round: uniform hessians only rescale gains, so the root split agrees
        let root = |t: &crate::trees::DecisionTree<f64>| match &t.nodes[0] {
            Node::Split {
                feature, bin_threshold, ..
            } => Some((*feature, *bin_threshold)),
            Node::Leaf { .. } => None,
        };
        assert!(root(&xgb.trees[0]).is_some());
        assert_eq!(root(&xgb.trees[0]), root(&gbt.trees[0]));
        // leaf weights differ by the constant hessian factor 1/(p(1-p))
        assert_ne!(xgb.trees[0], gbt.trees[0]);
        // second round: margins differ per row, so do the fitted trees
        assert_ne!(xgb.trees[1], gbt.trees[1]);
    }

    #[test]
    fn incremental_margins_match_recomputation() {
        let m = crafted();
        let c = TrainConfig {
            n_trees: 8,
            min_child_weight: 0.0,
            ..Default::default()
        };
        for kind in [ModelKind::Xgb, ModelKind::Gbt] {
            let mut rounds = 0;
            boost(&m, &c, kind, |model, margins| {
                rounds += 1;
                for (r, margin) in margins.iter().enumerate() {
                    assert!((margin - model.margin(m.row(r))).abs() < 1e-9);
                }
            })
            .unwrap();
            assert_eq!(rounds, 8);
        }
    }

    #[test]
    fn degenerate_single_class() {
        let m = FeatureMatrix::from_rows(&[vec![1.0], vec![2.0]], &[true, true]).unwrap();
        let model = train_xgb(
            &m,
            &TrainConfig {
                n_trees: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(model.predict(&m).unwrap().iter().all(|&p| p > 0.99));
        assert!(base_margin::<f64>(&[]).is_err());
    }
}
