use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::grow::DecisionTree;
use super::quantize::BinnedMatrix;
use super::{ModelKind, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::scalar::{sigmoid, Scalar};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// A trained model.
///
/// Forests average the per-tree positive fractions; boosted models return
/// `sigmoid(base_margin + learning_rate * Σ leaf weights)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble<F> {
    pub format_version: u32,
    pub kind: ModelKind,
    pub dtype: String,
    pub learning_rate: F,
    pub base_margin: F,
    pub schema_fingerprint: String,
    pub feature_names: Vec<String>,
    pub bin_edges: Vec<Vec<F>>,
    pub config: TrainConfig,
    pub trees: Vec<DecisionTree<F>>,
}

impl<F: Scalar> Ensemble<F> {
    pub(crate) fn empty(
        kind: ModelKind,
        matrix: &FeatureMatrix<F>,
        binned: &BinnedMatrix<F>,
        config: &TrainConfig,
        learning_rate: F,
        base_margin: F,
    ) -> Self {
        Ensemble {
            format_version: MODEL_FORMAT_VERSION,
            kind,
            dtype: F::DTYPE.to_owned(),
            learning_rate,
            base_margin,
            schema_fingerprint: matrix.schema.fingerprint(),
            feature_names: matrix.schema.names(),
            bin_edges: binned.edges.iter().map(|e| e.edges.clone()).collect(),
            config: config.clone(),
            trees: Vec::with_capacity(config.n_trees),
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Boosting margin (log-odds) for one row; unchecked row length.
    pub fn margin(&self, row: &[F]) -> F {
        let sum = self.trees.iter().fold(F::zero(), |acc, t| acc + t.value(row));
        self.base_margin + self.learning_rate * sum
    }

    fn score(&self, row: &[F]) -> F {
        match self.kind {
            ModelKind::Rf if !self.trees.is_empty() => {
                let sum = self.trees.iter().fold(F::zero(), |acc, t| acc + t.value(row));
                sum / F::from_usize(self.trees.len()).expect("tree count fits")
            }
            _ => sigmoid(self.margin(row)),
        }
    }

    /// Positive-class probability for one encoded row.
    pub fn predict_row(&self, row: &[F]) -> Result<F> {
        if row.len() != self.n_features() {
            return Err(Error::Validation(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.n_features()
            )));
        }
        Ok(self.score(row))
    }

    /// Scores every row of `matrix`, which must carry the training schema.
    pub fn predict(&self, matrix: &FeatureMatrix<F>) -> Result<Vec<F>> {
        let fingerprint = matrix.schema.fingerprint();
        if fingerprint != self.schema_fingerprint {
            return Err(Error::Validation(format!(
                "matrix schema {fingerprint} does not match model schema {}",
                self.schema_fingerprint
            )));
        }
        Ok(matrix.rows().map(|r| self.score(r)).collect())
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self)?;
        out.push(b'\n');
        Ok(out)
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_json()?)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        let model: Ensemble<F> = serde_json::from_reader(input)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        if model.dtype != F::DTYPE {
            return Err(Error::Format(format!(
                "model stores {} parameters, requested {}",
                model.dtype,
                F::DTYPE
            )));
        }
        Ok(model)
    }
}
