//! Train/test splitting, classification metrics and the model comparison
//! harness.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{FeatureMatrix, FeatureSet};
use crate::scalar::Scalar;
use crate::trees::{train, Ensemble, ModelKind, TrainConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

/// Row indices of a seeded train/test split: a uniform permutation of
/// `0..n`, of which the first `floor(n * train_fraction)` go to training.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Validation(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n < 2 || n_train == 0 || n_train == n {
        return Err(Error::Validation(format!(
            "cannot split {n} rows with train fraction {train_fraction}: one side would be empty"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut Xoshiro256PlusPlus::seed_from_u64(seed));
    let test = perm.split_off(n_train);
    Ok((perm, test))
}

pub fn split_train_test<F: Scalar>(
    matrix: &FeatureMatrix<F>,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix<F>, FeatureMatrix<F>)> {
    let (train, test) = split_indices(matrix.n_rows, train_fraction, seed)?;
    Ok((matrix.select_rows(&train), matrix.select_rows(&test)))
}

fn check_shape<F>(scores: &[F], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
///
/// Pair counts are accumulated exactly in integers, so the only rounding is
/// the final division.
pub fn auc<F: Scalar>(scores: &[F], labels: &[bool]) -> Result<f64> {
    check_shape(scores, labels)?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("AUC of NaN scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected"));

    // twice the number of correctly ordered pairs
    let mut doubled: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (mut pos, mut neg) = (0u128, 0u128);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                pos += 1;
            } else {
                neg += 1;
            }
            i += 1;
        }
        doubled += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
    }
    Ok(doubled as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Checks the counts against the size of the test set they describe.
    pub fn validate(&self, n_test_rows: u64) -> Result<()> {
        if self.total() != n_test_rows {
            return Err(Error::Validation(format!(
                "confusion matrix sums to {}, expected {n_test_rows}",
                self.total()
            )));
        }
        Ok(())
    }
}

/// Counts predictions, calling a row positive when `score >= threshold`.
pub fn confusion<F: Scalar>(scores: &[F], labels: &[bool], threshold: F) -> Result<ConfusionMatrix> {
    check_shape(scores, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    Ok(cm)
}

/// Precision and recall; a ratio with a zero denominator is reported as 0
/// and flagged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub precision_degenerate: bool,
    pub recall_degenerate: bool,
}

pub fn precision_recall(cm: &ConfusionMatrix) -> PrecisionRecall {
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            (0.0, true)
        } else {
            (num as f64 / den as f64, false)
        }
    };
    let (precision, precision_degenerate) = ratio(cm.tp, cm.tp + cm.fp);
    let (recall, recall_degenerate) = ratio(cm.tp, cm.tp + cm.fn_);
    PrecisionRecall {
        precision,
        recall,
        precision_degenerate,
        recall_degenerate,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub threshold: f64,
    pub confusion: ConfusionMatrix,
    pub auc: f64,
    #[serde(flatten)]
    pub precision_recall: PrecisionRecall,
}

pub fn metrics<F: Scalar>(scores: &[F], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let confusion = confusion(scores, labels, F::from_f64_lossy(threshold))?;
    Ok(Metrics {
        threshold,
        confusion,
        auc: auc(scores, labels)?,
        precision_recall: precision_recall(&confusion),
    })
}

/// Outcome of evaluating one trained model on a held-out set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub feature_set: FeatureSet,
    pub dtype: String,
    pub n_train: usize,
    pub n_test: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub train_seconds: f64,
    pub predict_seconds: f64,
    pub n_workers: usize,
    pub config: TrainConfig,
}

/// Scores `model` on `test` and times the prediction pass.
pub fn evaluate<F: Scalar>(model: &Ensemble<F>, test: &FeatureMatrix<F>, threshold: f64) -> Result<(Metrics, f64)> {
    let start = Instant::now();
    let scores = model.predict(test)?;
    let seconds = start.elapsed().as_secs_f64();
    Ok((metrics(&scores, &test.labels, threshold)?, seconds))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub train_fraction: f64,
    pub split_seed: u64,
    pub threshold: f64,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            train_fraction: DEFAULT_TRAIN_FRACTION,
            split_seed: 42,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// One row of a comparison: a report, or the error that prevented it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchEntry {
    pub model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Trains and evaluates each configuration in turn on one shared split.
///
/// A failing configuration is recorded and the remaining ones still run;
/// only an unsplittable matrix fails the whole call.
pub fn bench<F: Scalar>(
    matrix: &FeatureMatrix<F>,
    configs: &[(ModelKind, TrainConfig)],
    options: &BenchOptions,
) -> Result<Vec<BenchEntry>> {
    if configs.is_empty() {
        return Ok(Vec::new());
    }
    let (train_set, test_set) = split_train_test(matrix, options.train_fraction, options.split_seed)?;
    let entries = configs
        .iter()
        .map(|(kind, config)| {
            let run = || -> Result<EvalReport> {
                let start = Instant::now();
                let model = train(*kind, &train_set, config)?;
                let train_seconds = start.elapsed().as_secs_f64();
                let (metrics, predict_seconds) = evaluate(&model, &test_set, options.threshold)?;
                Ok(EvalReport {
                    model: *kind,
                    feature_set: matrix.schema.feature_set,
                    dtype: F::DTYPE.to_string(),
                    n_train: train_set.n_rows,
                    n_test: test_set.n_rows,
                    metrics,
                    train_seconds,
                    predict_seconds,
                    n_workers: config.n_workers,
                    config: config.clone(),
                })
            };
            match run() {
                Ok(report) => BenchEntry {
                    model: *kind,
                    report: Some(report),
                    error: None,
                },
                Err(e) => BenchEntry {
                    model: *kind,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(entries)
}

/// Plain-text comparison table, one row per model.
pub fn render_table(entries: &[BenchEntry]) -> String {
    let mut out = format!(
        "{:<10} {:>8} {:>10} {:>8} {:>15}\n",
        "Model", "AUC", "Precision", "Recall", "Computing Time"
    );
    for e in entries {
        let name = e.model.display_name();
        match (&e.report, &e.error) {
            (Some(r), _) => {
                let m = &r.metrics;
                let _ = writeln!(
                    out,
                    "{:<10} {:>7.2}% {:>10.4} {:>8.4} {:>14.2}s",
                    name,
                    m.auc * 100.0,
                    m.precision_recall.precision,
                    m.precision_recall.recall,
                    r.train_seconds
                );
            }
            (None, err) => {
                let _ = writeln!(
                    out,
                    "{:<10} failed: {}",
                    name,
                    err.as_deref().unwrap_or("unknown error")
                );
            }
        }
    }
    out
}

/// The same comparison as CSV, with the remaining report fields.
pub fn render_csv(entries: &[BenchEntry]) -> String {
    let mut out = String::from(
        "model,feature_set,auc,precision,recall,tp,fp,tn,fn,train_seconds,predict_seconds,n_workers,error\n",
    );
    for e in entries {
        match &e.report {
            Some(r) => {
                let m = &r.metrics;
                let c = &m.confusion;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},",
                    e.model,
                    r.feature_set.as_str(),
                    m.auc,
                    m.precision_recall.precision,
                    m.precision_recall.recall,
                    c.tp,
                    c.fp,
                    c.tn,
                    c.fn_,
                    r.train_seconds,
                    r.predict_seconds,
                    r.n_workers
                );
            }
            None => {
                let msg = e.error.as_deref().unwrap_or("").replace('"', "\"\"");
                let _ = writeln!(out, "{},,,,,,,,,,,,\"{}\"", e.model, msg);
            }
        }
    }
    out
}
