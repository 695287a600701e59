use serde::{Deserialize, Serialize};

use super::histogram::{GradHistogram, NodeSums};
use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Scalar};

/// First and second derivative of the logistic loss with respect to the margin.
///
/// `g = p - y` and `h = p(1 - p)` with `p = sigmoid(margin)`, computed through
/// `sigmoid(-margin)` so neither loses precision when `p` is close to 0 or 1.
pub fn logistic_grad_hess<F: Scalar>(margin: F, label: bool) -> (F, F) {
    let p = sigmoid(margin);
    let q = sigmoid(-margin);
    let g = if label { -q } else { p };
    (g, p * q)
}

/// Optimal leaf weight `-G / (H + lambda)`.
pub fn leaf_weight<F: Scalar>(grad: F, hess: F, lambda: F) -> Result<F> {
    let denom = hess + lambda;
    if denom.is_nan() || denom <= F::zero() {
        return Err(Error::DegenerateNode(format!("H + lambda = {denom} is not positive")));
    }
    Ok(-grad / denom)
}

fn score<F: Scalar>(g: F, h: F, lambda: F) -> Result<F> {
    let denom = h + lambda;
    if denom.is_nan() || denom <= F::zero() {
        return Err(Error::DegenerateNode(format!("H + lambda = {denom} is not positive")));
    }
    Ok(g * g / denom)
}

/// Regularized split gain
/// `½·[G_L²/(H_L+λ) + G_R²/(H_R+λ) − (G_L+G_R)²/(H_L+H_R+λ)] − γ`.
pub fn split_gain<F: Scalar>(left: (F, F), right: (F, F), lambda: F, gamma: F) -> Result<F> {
    let (gl, hl) = left;
    let (gr, hr) = right;
    let parent = score(gl + gr, hl + hr, lambda)?;
    Ok(F::half() * (score(gl, hl, lambda)? + score(gr, hr, lambda)? - parent) - gamma)
}

/// `n · gini` for a node with weighted size `n` and weighted positives `pos`.
pub fn weighted_gini<F: Scalar>(pos: F, n: F) -> F {
    if n <= F::zero() {
        return F::zero();
    }
    let p = pos / n;
    let two = F::one() + F::one();
    n * two * p * (F::one() - p)
}

/// Impurity decrease of a split; sums carry (positives, weight) in (grad, hess).
pub fn gini_gain<F: Scalar>(left: &NodeSums<F>, right: &NodeSums<F>, min_decrease: F) -> F {
    let parent = weighted_gini(left.grad + right.grad, left.hess + right.hess);
    parent - weighted_gini(left.grad, left.hess) - weighted_gini(right.grad, right.hess) - min_decrease
}

/// How splits are scored and leaves valued.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SplitRule<F> {
    /// Second-order boosting: regularized gain, leaf = `-G/(H+λ)`.
    Regularized { lambda: F, gamma: F },
    /// Classification tree: gini decrease over (positives, weight) sums,
    /// leaf = positive fraction.
    Gini { min_decrease: F },
}

impl<F: Scalar> SplitRule<F> {
    pub fn gain(&self, left: &NodeSums<F>, right: &NodeSums<F>) -> Result<F> {
        match *self {
            SplitRule::Regularized { lambda, gamma } => {
                split_gain((left.grad, left.hess), (right.grad, right.hess), lambda, gamma)
            }
            SplitRule::Gini { min_decrease } => Ok(gini_gain(left, right, min_decrease)),
        }
    }

    pub fn leaf_value(&self, sums: &NodeSums<F>) -> Result<F> {
        match *self {
            SplitRule::Regularized { lambda, .. } => leaf_weight(sums.grad, sums.hess, lambda),
            SplitRule::Gini { .. } => {
                if sums.hess > F::zero() {
                    Ok(sums.grad / sums.hess)
                } else {
                    Err(Error::DegenerateNode("empty classification leaf".into()))
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParams<F> {
    pub rule: SplitRule<F>,
    /// Minimum hessian (or weight, for gini) on each side.
    pub min_child_weight: F,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate<F> {
    pub feature: usize,
    /// Value bins `0..=bin_threshold` go left.
    pub bin_threshold: usize,
    pub gain: F,
    pub left: NodeSums<F>,
    pub right: NodeSums<F>,
    pub missing_goes_left: bool,
}

/// Best split of a node whose rows produced `hist`, or `None` when no boundary
/// has positive gain with `min_child_weight` satisfied on both sides.
///
/// Every feature is scanned left to right; at each boundary the missing bin is
/// tried on the left, then (if the node has missing values) on the right. A
/// later candidate replaces the incumbent only with strictly larger gain, so
/// ties go to the lowest feature, then the lowest bin, then missing-left.
pub fn find_best_split<F: Scalar>(
    hist: &GradHistogram<F>,
    parent: &NodeSums<F>,
    params: &SplitParams<F>,
    feature_mask: Option<&[bool]>,
) -> Option<SplitCandidate<F>> {
    let mut best: Option<SplitCandidate<F>> = None;
    for f in 0..hist.n_features() {
        if feature_mask.is_some_and(|m| !m[f]) {
            continue;
        }
        let cells = hist.feature(f);
        let n_bins = cells.len() - 1;
        let missing = cells[n_bins];
        let mut cum = NodeSums::zero();
        for (b, &cell) in cells[..n_bins].iter().enumerate() {
            cum += cell;
            let is_last = b + 1 == n_bins;
            // the last value bin only yields a "present vs missing" split
            let placements: &[bool] = match (is_last, missing.count > 0) {
                (false, false) => &[true],
                (false, true) => &[true, false],
                (true, true) => &[false],
                (true, false) => &[],
            };
            for &missing_goes_left in placements {
                let left = if missing_goes_left { cum + missing } else { cum };
                let right = *parent - left;
                if left.count == 0 || right.count == 0 {
                    continue;
                }
                if left.hess < params.min_child_weight || right.hess < params.min_child_weight {
                    continue;
                }
                let Ok(gain) = params.rule.gain(&left, &right) else {
                    continue;
                };
                if !gain.is_finite() || gain <= F::zero() {
                    continue;
                }
                if best.is_none_or(|b| gain > b.gain) {
                    best = Some(SplitCandidate {
                        feature: f,
                        bin_threshold: b,
                        gain,
                        left,
                        right,
                        missing_goes_left,
                    });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reg(lambda: f64, gamma: f64) -> SplitParams<f64> {
        SplitParams {
            rule: SplitRule::Regularized { lambda, gamma },
            min_child_weight: 0.0,
        }
    }

    #[test]
    fn grad_hess_values() {
        assert_eq!(logistic_grad_hess(0.0f64, true), (-0.5, 0.25));
        assert_eq!(logistic_grad_hess(0.0f64, false), (0.5, 0.25));
        // 50-digit reference: p(20) - 1 and p(20)(1 - p(20))
        let (g, h) = logistic_grad_hess(20.0f64, true);
        assert!((g - -2.061_153_618_190_203_6e-9).abs() / 2.06e-9 < 1e-12);
        assert!((h - 2.061_153_613_941_849e-9).abs() / 2.06e-9 < 1e-12);
    }

    #[test]
    fn leaf_weights() {
        assert_eq!(leaf_weight(0.0f64, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(leaf_weight(-2.0f64, 3.0, 1.0).unwrap(), 0.5);
        assert_eq!(leaf_weight(1.0f64, 2.0, 0.0).unwrap(), -0.5);
        assert!(matches!(leaf_weight(1.0f64, 0.0, 0.0), Err(Error::DegenerateNode(_))));
        // unit hessians reduce to the mean residual
        assert_eq!(leaf_weight(-6.0f64, 4.0, 0.0).unwrap(), 6.0 / 4.0);
    }

    #[test]
    fn gains() {
        assert_eq!(split_gain((-2.0f64, 2.0), (2.0, 2.0), 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(split_gain((0.0f64, 1.0), (0.0, 1.0), 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(split_gain((-2.0f64, 2.0), (2.0, 2.0), 0.0, 3.0).unwrap(), -1.0);
        assert!(split_gain((1.0f64, 0.0), (1.0, 1.0), 0.0, 0.0).is_err());
    }

    #[test]
    fn gini_values() {
        // pure children from a 50/50 parent of weight 4: decrease = 4 * 0.5
        let l = NodeSums::new(2.0f64, 2.0, 2);
        let r = NodeSums::new(0.0, 2.0, 2);
        assert_eq!(gini_gain(&l, &r, 0.0), 2.0);
        assert_eq!(weighted_gini(0.0f64, 0.0), 0.0);
        let rule = SplitRule::Gini { min_decrease: 0.0 };
        assert_eq!(rule.leaf_value(&NodeSums::new(3.0f64, 4.0, 4)).unwrap(), 0.75);
    }

    fn one_feature(cells: &[(f64, f64, u64)]) -> GradHistogram<f64> {
        let mut h = GradHistogram::zeros([cells.len() + 1]);
        for (c, &(g, hs, n)) in h.feature_mut(0).iter_mut().zip(cells) {
            *c = NodeSums::new(g, hs, n);
        }
        h
    }

    #[test]
    fn identical_rows_have_no_split() {
        let h = one_feature(&[(-1.0, 1.0, 4)]);
        assert!(find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), None).is_none());
    }

    #[test]
    fn perfect_separation_is_found() {
        // 4 rows, values 1..4, labels 0,0,1,1 at margin 0
        let h = one_feature(&[(0.5, 0.25, 1), (0.5, 0.25, 1), (-0.5, 0.25, 1), (-0.5, 0.25, 1)]);
        let best = find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), None).unwrap();
        assert_eq!(best.bin_threshold, 1);
        // exhaustive oracle over the three boundaries
        let gains: Vec<f64> = (1..4)
            .map(|k| {
                let gl: f64 = [0.5, 0.5, -0.5, -0.5][..k].iter().sum();
                let hl = 0.25 * k as f64;
                split_gain((gl, hl), (-gl, 1.0 - hl), 0.0, 0.0).unwrap()
            })
            .collect();
        let max = gains.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(best.gain, max);
        assert_eq!(max, gains[1]);
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        let mut h = GradHistogram::zeros([3, 3]);
        for f in 0..2 {
            h.feature_mut(f)[0] = NodeSums::new(-1.0, 1.0, 1);
            h.feature_mut(f)[1] = NodeSums::new(1.0, 1.0, 1);
        }
        let best = find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), None).unwrap();
        assert_eq!(best.feature, 0);
        let mask = [false, true];
        let masked = find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), Some(&mask)).unwrap();
        assert_eq!(masked.feature, 1);
        assert_eq!(masked.gain, best.gain);
    }

    #[test]
    fn missing_direction_is_learned() {
        // bins: [-1 (n=2), +1 (n=2), missing: -1 (n=2)]
        let h = one_feature(&[(-1.0, 1.0, 2), (1.0, 1.0, 2)]);
        let mut h2 = h.clone();
        h2.feature_mut(0)[2] = NodeSums::new(-1.0, 1.0, 2);
        let best = find_best_split(&h2, &h2.totals(0), &reg(0.0, 0.0), None).unwrap();
        assert!(best.missing_goes_left);
        assert_eq!(best.left.count, 4);
        // missing rows resembling the right side go right
        h2.feature_mut(0)[2] = NodeSums::new(1.0, 1.0, 2);
        let best = find_best_split(&h2, &h2.totals(0), &reg(0.0, 0.0), None).unwrap();
        assert!(!best.missing_goes_left);
        assert_eq!(best.right.count, 4);
    }

    #[test]
    fn present_versus_missing_split() {
        let mut h = one_feature(&[(-2.0, 1.0, 2)]);
        h.feature_mut(0)[1] = NodeSums::new(2.0, 1.0, 2);
        let best = find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), None).unwrap();
        assert_eq!((best.bin_threshold, best.missing_goes_left), (0, false));
    }

    #[test]
    fn min_child_weight_blocks_light_children() {
        let h = one_feature(&[(-1.0, 0.25, 1), (1.0, 0.25, 1)]);
        let params = SplitParams {
            min_child_weight: 0.5,
            ..reg(0.0, 0.0)
        };
        assert!(find_best_split(&h, &h.totals(0), &params, None).is_none());
        assert!(find_best_split(&h, &h.totals(0), &reg(0.0, 0.0), None).is_some());
    }

    fn log_loss(m: f64, y: bool) -> f64 {
        // softplus(-m) for y=1, softplus(m) for y=0, without cancellation
        let x = if y { -m } else { m };
        x.max(0.0) + (-x.abs()).exp().ln_1p()
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(m in -10.0f64..10.0, y: bool) {
            let step = 1e-5;
            let (g, h) = logistic_grad_hess(m, y);
            let fd_g = (log_loss(m + step, y) - log_loss(m - step, y)) / (2.0 * step);
            prop_assert!((g - fd_g).abs() <= 1e-6 * g.abs());
            let fd_h = (logistic_grad_hess(m + step, y).0 - logistic_grad_hess(m - step, y).0) / (2.0 * step);
            prop_assert!((h - fd_h).abs() <= 1e-6 * h.abs());
        }

        #[test]
        fn split_sums_partition_parent(
            cells in prop::collection::vec((-5.0f64..5.0, 0.01f64..2.0, 1u64..5), 2..12),
        ) {
            let h = one_feature(&cells);
            let parent = h.totals(0);
            if let Some(c) = find_best_split(&h, &parent, &reg(1.0, 0.0), None) {
                prop_assert_eq!(c.left.count + c.right.count, parent.count);
                prop_assert!((c.left.grad + c.right.grad - parent.grad).abs() < 1e-9);
                prop_assert!(c.gain.is_finite() && c.gain > 0.0);
            }
        }
    }
}
