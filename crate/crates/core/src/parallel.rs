//! Deterministic data-parallel histogram construction.
//!
//! A node's rows are cut into fixed chunks of [`CHUNK_ROWS`] consecutive row
//! indices. Every chunk histogram is accumulated sequentially, and the chunk
//! histograms are combined by a pairwise reduction tree whose shape depends
//! only on the number of chunks. Workers own contiguous runs of chunks (see
//! [`partition_rows`]), so the worker count changes who computes a chunk but
//! never how the floating-point sums associate: any `n_workers` produces the
//! same bits as a single worker.

use std::ops::Range;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trees::histogram::{accumulate, GradHistogram};
use crate::trees::quantize::BinnedMatrix;

/// Rows per unit of parallel work.
pub const CHUNK_ROWS: usize = 16_384;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "JAMPRED_WORKERS";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub n_rows: usize,
    pub n_workers: usize,
    pub ranges: Vec<Range<usize>>,
}

impl PartitionPlan {
    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// Splits `0..n_rows` into `n_workers` contiguous ranges whose sizes differ by
/// at most one; the first `n_rows % n_workers` workers take the larger share.
pub fn partition_rows(n_rows: usize, n_workers: usize) -> Result<PartitionPlan> {
    if n_workers == 0 {
        return Err(Error::Config("n_workers must be at least 1".into()));
    }
    let base = n_rows / n_workers;
    let extra = n_rows % n_workers;
    let mut start = 0;
    let ranges = (0..n_workers)
        .map(|w| {
            let len = base + usize::from(w < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect();
    Ok(PartitionPlan {
        n_rows,
        n_workers,
        ranges,
    })
}

/// A partial histogram tagged with its position in the reduction order.
#[derive(Clone, Debug)]
pub struct HistogramPart<F> {
    pub index: usize,
    pub hist: GradHistogram<F>,
}

/// Cell-wise sum of `parts`, reduced pairwise in `index` order.
///
/// Parts are first sorted by index, so the order in which they were produced
/// (or collected) has no effect on the result.
pub fn reduce_histograms<F: Scalar>(mut parts: Vec<HistogramPart<F>>) -> Result<GradHistogram<F>> {
    if parts.is_empty() {
        return Err(Error::Validation("nothing to reduce".into()));
    }
    if parts.iter().any(|p| !p.hist.same_shape(&parts[0].hist)) {
        return Err(Error::Validation("histogram shapes differ".into()));
    }
    parts.sort_by_key(|p| p.index);
    let mut level: Vec<GradHistogram<F>> = parts.into_iter().map(|p| p.hist).collect();
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        let mut it = level.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add(&b);
            }
            next.push(a);
        }
        level = next;
    }
    Ok(level.pop().expect("non-empty"))
}

/// Worker count from [`WORKERS_ENV`], falling back to 1.
pub fn workers_from_env() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n >= 1)
        .unwrap_or(1)
}

/// Pool of histogram workers shared by every node of a training run.
pub struct Workers {
    n_workers: usize,
    pool: Option<ThreadPool>,
}

impl Workers {
    pub fn new(n_workers: usize) -> Result<Self> {
        if n_workers == 0 {
            return Err(Error::Config("n_workers must be at least 1".into()));
        }
        let pool = if n_workers > 1 {
            Some(
                ThreadPoolBuilder::new()
                    .num_threads(n_workers)
                    .thread_name(|i| format!("hist-worker-{i}"))
                    .build()
                    .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Workers { n_workers, pool })
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    /// Histogram of `rows` (ascending), chunked and reduced as described in
    /// the module docs.
    pub fn build_histogram<F: Scalar>(
        &self,
        binned: &BinnedMatrix<F>,
        rows: &[u32],
        grad: &[F],
        hess: &[F],
    ) -> GradHistogram<F> {
        let n_chunks = rows.len().div_ceil(CHUNK_ROWS).max(1);
        let chunk = |i: usize| {
            let lo = (i * CHUNK_ROWS).min(rows.len());
            let hi = ((i + 1) * CHUNK_ROWS).min(rows.len());
            let mut hist = GradHistogram::for_matrix(binned);
            accumulate(&mut hist, binned, &rows[lo..hi], grad, hess);
            HistogramPart { index: i, hist }
        };
        if n_chunks == 1 {
            return chunk(0).hist;
        }
        let plan = partition_rows(n_chunks, self.n_workers).expect("n_workers >= 1");
        let parts: Vec<HistogramPart<F>> = match &self.pool {
            Some(pool) => pool.install(|| plan.ranges.par_iter().flat_map_iter(|r| r.clone().map(chunk)).collect()),
            None => (0..n_chunks).map(chunk).collect(),
        };
        reduce_histograms(parts).expect("uniform shapes")
    }
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers").field("n_workers", &self.n_workers).finish()
    }
}
