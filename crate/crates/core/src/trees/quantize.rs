use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::scalar::Scalar;

/// Per-feature thresholds. A value `v` falls in bin `#{e in edges : e < v}`,
/// so bin `b` holds exactly the values `edges[b-1] < v <= edges[b]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinEdges<F> {
    pub edges: Vec<F>,
}

impl<F: Scalar> BinEdges<F> {
    /// Number of value bins (the missing bin is extra).
    pub fn n_bins(&self) -> usize {
        self.edges.len() + 1
    }

    #[inline]
    pub fn bin(&self, v: F) -> usize {
        self.edges.partition_point(|&e| e < v)
    }

    /// Largest value routed left by a split at `bin`.
    pub fn upper(&self, bin: usize) -> F {
        self.edges.get(bin).copied().unwrap_or_else(F::max_value)
    }
}

/// Quantized copy of a feature matrix: row-major bin indices, one reserved
/// missing bin per feature (index = number of value bins).
#[derive(Clone, Debug)]
pub struct BinnedMatrix<F> {
    pub n_rows: usize,
    pub n_features: usize,
    pub bins: Vec<u16>,
    pub edges: Vec<BinEdges<F>>,
}

impl<F: Scalar> BinnedMatrix<F> {
    #[inline]
    pub fn bin(&self, row: usize, feature: usize) -> usize {
        self.bins[row * self.n_features + feature] as usize
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[u16] {
        &self.bins[row * self.n_features..(row + 1) * self.n_features]
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].n_bins()
    }

    pub fn missing_bin(&self, feature: usize) -> usize {
        self.edges[feature].n_bins()
    }
}

pub const MAX_BINS_LIMIT: usize = u16::MAX as usize - 1;

/// Midpoint that is strictly below `hi` (falls back to `lo` when the two are
/// adjacent floats).
pub(crate) fn midpoint<F: Scalar>(lo: F, hi: F) -> F {
    let mid = lo + (hi - lo) * F::half();
    if mid < hi {
        mid
    } else {
        lo
    }
}

/// Edges for one feature's sorted non-missing values.
pub fn quantile_edges<F: Scalar>(sorted: &[F], max_bins: usize) -> Vec<F> {
    let n = sorted.len();
    if n == 0 {
        return Vec::new();
    }
    let mut distinct = 1;
    for w in sorted.windows(2) {
        if w[0] < w[1] {
            distinct += 1;
            if distinct > max_bins {
                break;
            }
        }
    }
    if distinct <= max_bins {
        // one bin per distinct value
        return sorted
            .windows(2)
            .filter(|w| w[0] < w[1])
            .map(|w| midpoint(w[0], w[1]))
            .collect();
    }
    let max = sorted[n - 1];
    let mut edges: Vec<F> = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let idx = k * n / max_bins;
        let (lo, hi) = (sorted[idx - 1], sorted[idx]);
        let edge = if lo < hi { midpoint(lo, hi) } else { lo };
        if edge < max && edges.last().is_none_or(|&last| last < edge) {
            edges.push(edge);
        }
    }
    edges
}

pub fn quantize<F: Scalar>(matrix: &FeatureMatrix<F>, max_bins: usize) -> Result<BinnedMatrix<F>> {
    if max_bins < 2 {
        return Err(Error::Config(format!("max_bins must be at least 2, got {max_bins}")));
    }
    if max_bins > MAX_BINS_LIMIT {
        return Err(Error::Config(format!("max_bins must be at most {MAX_BINS_LIMIT}")));
    }
    if matrix.n_rows == 0 {
        return Err(Error::Validation("cannot quantize an empty matrix".into()));
    }
    let nf = matrix.n_features;
    let mut edges = Vec::with_capacity(nf);
    let mut column = Vec::with_capacity(matrix.n_rows);
    for f in 0..nf {
        column.clear();
        column.extend(matrix.column(f).filter(|v| !v.is_nan()));
        column.sort_unstable_by(|a, b| a.partial_cmp(b).expect("NaN filtered"));
        edges.push(BinEdges {
            edges: quantile_edges(&column, max_bins),
        });
    }
    let mut bins = vec![0u16; matrix.n_rows * nf];
    for (dst, src) in bins.chunks_exact_mut(nf).zip(matrix.rows()) {
        for f in 0..nf {
            let e = &edges[f];
            dst[f] = if src[f].is_nan() { e.n_bins() } else { e.bin(src[f]) } as u16;
        }
    }
    Ok(BinnedMatrix {
        n_rows: matrix.n_rows,
        n_features: nf,
        bins,
        edges,
    })
}
