use std::ops::{AddAssign, SubAssign};

use serde::{Deserialize, Serialize};

use super::quantize::BinnedMatrix;
use crate::scalar::Scalar;

/// Gradient, hessian and row-count totals for a set of rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeSums<F> {
    pub grad: F,
    pub hess: F,
    pub count: u64,
}

impl<F: Scalar> NodeSums<F> {
    pub fn new(grad: F, hess: F, count: u64) -> Self {
        NodeSums { grad, hess, count }
    }

    pub fn zero() -> Self {
        NodeSums::new(F::zero(), F::zero(), 0)
    }
}

impl<F: Scalar> AddAssign for NodeSums<F> {
    fn add_assign(&mut self, o: Self) {
        self.grad = self.grad + o.grad;
        self.hess = self.hess + o.hess;
        self.count += o.count;
    }
}

impl<F: Scalar> SubAssign for NodeSums<F> {
    fn sub_assign(&mut self, o: Self) {
        self.grad = self.grad - o.grad;
        self.hess = self.hess - o.hess;
        self.count -= o.count;
    }
}

impl<F: Scalar> std::ops::Add for NodeSums<F> {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self += o;
        self
    }
}

impl<F: Scalar> std::ops::Sub for NodeSums<F> {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self -= o;
        self
    }
}

/// Per (feature, bin) sums. Feature `f` owns `cells[offsets[f]..offsets[f+1]]`;
/// the last cell of each feature is its missing bin.
#[derive(Clone, Debug, PartialEq)]
pub struct GradHistogram<F> {
    offsets: Vec<usize>,
    cells: Vec<NodeSums<F>>,
}

impl<F: Scalar> GradHistogram<F> {
    /// All-zero histogram with `bins_per_feature[f]` cells for feature `f`
    /// (value bins plus the missing bin).
    pub fn zeros(bins_per_feature: impl IntoIterator<Item = usize>) -> Self {
        let mut offsets = vec![0];
        for n in bins_per_feature {
            offsets.push(offsets.last().unwrap() + n);
        }
        let total = *offsets.last().unwrap();
        GradHistogram {
            offsets,
            cells: vec![NodeSums::zero(); total],
        }
    }

    pub fn for_matrix(binned: &BinnedMatrix<F>) -> Self {
        Self::zeros((0..binned.n_features).map(|f| binned.n_bins(f) + 1))
    }

    pub fn n_features(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.offsets == other.offsets
    }

    pub fn feature(&self, f: usize) -> &[NodeSums<F>] {
        &self.cells[self.offsets[f]..self.offsets[f + 1]]
    }

    pub fn feature_mut(&mut self, f: usize) -> &mut [NodeSums<F>] {
        &mut self.cells[self.offsets[f]..self.offsets[f + 1]]
    }

    pub fn cells(&self) -> &[NodeSums<F>] {
        &self.cells
    }

    /// Totals over the bins of feature `f`, added in bin order.
    pub fn totals(&self, f: usize) -> NodeSums<F> {
        self.feature(f).iter().fold(NodeSums::zero(), |acc, &c| acc + c)
    }

    /// Cell-wise `self += other`. Shapes must match.
    pub fn add(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a += b;
        }
    }

    /// Cell-wise `self -= other`. Shapes must match.
    pub fn subtract(&mut self, other: &Self) {
        debug_assert!(self.same_shape(other));
        for (a, &b) in self.cells.iter_mut().zip(&other.cells) {
            *a -= b;
        }
    }

    pub fn bit_eq(&self, other: &Self) -> bool {
        self.same_shape(other)
            && self.cells.iter().zip(&other.cells).all(|(a, b)| {
                a.count == b.count
                    && a.grad.as_f64().to_bits() == b.grad.as_f64().to_bits()
                    && a.hess.as_f64().to_bits() == b.hess.as_f64().to_bits()
            })
    }
}

/// Accumulates `grad`/`hess`/count over `rows` into a fresh histogram.
///
/// Rows are visited in the order given (callers pass them ascending), one
/// addition per cell per row, so the floating-point result is reproducible.
pub fn build_histograms<F: Scalar>(binned: &BinnedMatrix<F>, rows: &[u32], grad: &[F], hess: &[F]) -> GradHistogram<F> {
    let mut hist = GradHistogram::for_matrix(binned);
    accumulate(&mut hist, binned, rows, grad, hess);
    hist
}

pub(crate) fn accumulate<F: Scalar>(
    hist: &mut GradHistogram<F>,
    binned: &BinnedMatrix<F>,
    rows: &[u32],
    grad: &[F],
    hess: &[F],
) {
    debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
    let nf = binned.n_features;
    let offsets = &hist.offsets[..nf];
    let cells = &mut hist.cells;
    for &r in rows {
        let r = r as usize;
        let (g, h) = (grad[r], hess[r]);
        for (&off, &b) in offsets.iter().zip(binned.row(r)) {
            let c = &mut cells[off + b as usize];
            c.grad = c.grad + g;
            c.hess = c.hess + h;
            c.count += 1;
        }
    }
}
