//! Histogram-based tree ensembles: random forest, first-order gradient
//! boosting and second-order regularized boosting.

mod boost;
mod forest;
pub mod grow;
pub mod histogram;
mod model;
pub mod quantize;
pub mod split;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::parallel::Workers;
use crate::scalar::Scalar;

pub use boost::{train_gbt, train_xgb};
pub use forest::train_rf;
pub use grow::{grow_tree, DecisionTree, FeatureSampling, GrowParams, GrownTree, Node};
pub use histogram::{build_histograms, GradHistogram, NodeSums};
pub use model::{Ensemble, MODEL_FORMAT_VERSION};
pub use quantize::{quantize, BinEdges, BinnedMatrix};
pub use split::{
    find_best_split, gini_gain, leaf_weight, logistic_grad_hess, split_gain, SplitCandidate, SplitParams, SplitRule,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rf,
    Gbt,
    Xgb,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Rf, ModelKind::Gbt, ModelKind::Xgb];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rf => "rf",
            ModelKind::Gbt => "gbt",
            ModelKind::Xgb => "xgb",
        }
    }

    /// Column header used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Rf => "RF",
            ModelKind::Gbt => "GBT",
            ModelKind::Xgb => "XGBoost",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown model {s:?} (expected rf, gbt or xgb)")))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Training hyperparameters shared by the three trainers.
///
/// `n_workers` only affects speed, never the model, and is therefore left out
/// of serialized models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub max_bins: usize,
    /// Rows drawn per forest tree, as a fraction of the training rows.
    pub subsample_rows: f64,
    /// Features considered per forest node, as a fraction of all features.
    pub subsample_features: f64,
    /// Forest rows are drawn with replacement when set, without otherwise.
    pub bootstrap: bool,
    pub seed: u64,
    #[serde(skip)]
    pub n_workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            max_depth: 5,
            max_leaves: 256,
            learning_rate: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            max_bins: 256,
            subsample_rows: 1.0,
            subsample_features: 1.0,
            bootstrap: true,
            seed: 42,
            n_workers: 1,
        }
    }
}

impl TrainConfig {
    /// Defaults with forests sampling half the features at each node.
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Rf => TrainConfig {
                subsample_features: 0.5,
                ..TrainConfig::default()
            },
            _ => TrainConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("max_depth", self.max_depth),
            ("max_leaves", self.max_leaves),
            ("n_workers", self.n_workers),
        ] {
            if v < 1 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if self.max_bins < 2 || self.max_bins > quantize::MAX_BINS_LIMIT {
            return fail(format!("max_bins must be in 2..={}", quantize::MAX_BINS_LIMIT));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("subsample_rows", self.subsample_rows),
            ("subsample_features", self.subsample_features),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must be in (0, 1], got {v}"));
            }
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// Trains the requested model kind.
pub fn train<F: Scalar>(kind: ModelKind, matrix: &FeatureMatrix<F>, config: &TrainConfig) -> Result<Ensemble<F>> {
    match kind {
        ModelKind::Rf => train_rf(matrix, config),
        ModelKind::Gbt => train_gbt(matrix, config),
        ModelKind::Xgb => train_xgb(matrix, config),
    }
}

/// Common setup: validation, quantization and the worker pool.
fn prepare<F: Scalar>(matrix: &FeatureMatrix<F>, config: &TrainConfig) -> Result<(BinnedMatrix<F>, Workers)> {
    config.validate()?;
    if matrix.n_rows > u32::MAX as usize {
        return Err(Error::Validation("more than 2^32 - 1 training rows".into()));
    }
    let binned = quantize(matrix, config.max_bins)?;
    Ok((binned, Workers::new(config.n_workers)?))
}
