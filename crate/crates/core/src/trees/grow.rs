use std::ops::Range;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use super::histogram::{GradHistogram, NodeSums};
use super::quantize::BinnedMatrix;
use super::split::{find_best_split, SplitCandidate, SplitParams};
use crate::error::Result;
use crate::parallel::Workers;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node<F> {
    Split {
        feature: usize,
        bin_threshold: usize,
        /// Raw-value form of `bin_threshold`: values `<= threshold` go left.
        threshold: F,
        missing_goes_left: bool,
        left: usize,
        right: usize,
        gain: F,
    },
    Leaf {
        value: F,
    },
}

/// Axis-aligned binary tree stored as a node array; node 0 is the root and
/// children always come after their parent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree<F> {
    pub nodes: Vec<Node<F>>,
}

impl<F: Scalar> DecisionTree<F> {
    pub fn leaf(value: F) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Index of the leaf `row` lands in.
    pub fn leaf_index(&self, row: &[F]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                    ..
                } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() {
                        *missing_goes_left
                    } else {
                        v <= *threshold
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn value(&self, row: &[F]) -> F {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk<F>(nodes: &[Node<F>], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Per-node feature subsampling (random forests).
#[derive(Clone, Copy, Debug)]
pub struct FeatureSampling {
    pub fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct GrowParams<F> {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub split: SplitParams<F>,
    pub features: Option<FeatureSampling>,
}

/// A grown tree plus the final row partition of its leaves.
#[derive(Debug)]
pub struct GrownTree<F> {
    pub tree: DecisionTree<F>,
    /// Row indices grouped by leaf; ascending within each leaf.
    pub rows: Vec<u32>,
    /// (leaf node, range into `rows`).
    pub leaves: Vec<(usize, Range<usize>)>,
}

impl<F: Scalar> GrownTree<F> {
    /// Calls `f(row, leaf_value)` for every training row.
    pub fn for_each_row(&self, mut f: impl FnMut(usize, F)) {
        for (node, range) in &self.leaves {
            let Node::Leaf { value } = self.tree.nodes[*node] else {
                unreachable!("leaf list holds leaves")
            };
            for &r in &self.rows[range.clone()] {
                f(r as usize, value);
            }
        }
    }
}

struct Open<F> {
    node: usize,
    depth: usize,
    range: Range<usize>,
    hist: GradHistogram<F>,
    best: SplitCandidate<F>,
}

struct Sampler {
    rng: Xoshiro256PlusPlus,
    k: usize,
    n: usize,
}

impl Sampler {
    fn new(s: FeatureSampling, n: usize) -> Self {
        let k = ((s.fraction * n as f64).ceil() as usize).clamp(1, n);
        Sampler {
            rng: Xoshiro256PlusPlus::seed_from_u64(s.seed),
            k,
            n,
        }
    }

    fn mask(&mut self) -> Vec<bool> {
        let mut mask = vec![false; self.n];
        for f in rand::seq::index::sample(&mut self.rng, self.n, self.k) {
            mask[f] = true;
        }
        mask
    }
}

/// Best-first growth over the rows in `rows` (ascending).
///
/// The open node with the highest split gain (ties: lowest node index) is
/// expanded next. Growth stops when no open node has a positive-gain split,
/// or when one more split would exceed `max_leaves`; nodes at `max_depth`
/// are never split. Of the two children, the one with fewer rows (left on a
/// tie) gets a freshly built histogram and the other is the parent minus it.
pub fn grow_tree<F: Scalar>(
    binned: &BinnedMatrix<F>,
    rows: Vec<u32>,
    grad: &[F],
    hess: &[F],
    params: &GrowParams<F>,
    workers: &Workers,
) -> Result<GrownTree<F>> {
    let mut rows = rows;
    let mut sampler = params.features.map(|s| Sampler::new(s, binned.n_features));
    let mut next_mask = || sampler.as_mut().map(Sampler::mask);

    let mut nodes: Vec<Node<F>> = vec![Node::Leaf { value: F::zero() }];
    let mut sums: Vec<NodeSums<F>> = Vec::new();
    let mut done: Vec<(usize, Range<usize>)> = Vec::new();
    let mut open: Vec<Open<F>> = Vec::new();

    let root_hist = workers.build_histogram(binned, &rows, grad, hess);
    let root_sums = root_hist.totals(0);
    sums.push(root_sums);
    let consider = |hist: GradHistogram<F>,
                    node: usize,
                    depth: usize,
                    range: Range<usize>,
                    node_sums: &NodeSums<F>,
                    mask: Option<Vec<bool>>,
                    open: &mut Vec<Open<F>>,
                    done: &mut Vec<(usize, Range<usize>)>| {
        let best = if depth < params.max_depth {
            find_best_split(&hist, node_sums, &params.split, mask.as_deref())
        } else {
            None
        };
        match best {
            Some(best) => open.push(Open {
                node,
                depth,
                range,
                hist,
                best,
            }),
            None => done.push((node, range)),
        }
    };
    let root_mask = next_mask();
    consider(
        root_hist,
        0,
        0,
        0..rows.len(),
        &root_sums,
        root_mask,
        &mut open,
        &mut done,
    );

    let mut n_leaves = 1;
    let mut scratch: Vec<u32> = Vec::new();
    while n_leaves < params.max_leaves && !open.is_empty() {
        let pick = (0..open.len())
            .reduce(|a, b| {
                let (x, y) = (&open[a], &open[b]);
                if y.best.gain > x.best.gain || (y.best.gain == x.best.gain && y.node < x.node) {
                    b
                } else {
                    a
                }
            })
            .expect("open is non-empty");
        let Open {
            node,
            depth,
            range,
            hist: parent_hist,
            best,
        } = open.swap_remove(pick);

        // stable partition of this node's rows
        let missing = binned.missing_bin(best.feature);
        let go_left = |r: u32| {
            let b = binned.bin(r as usize, best.feature);
            if b == missing {
                best.missing_goes_left
            } else {
                b <= best.bin_threshold
            }
        };
        scratch.clear();
        let slice = &mut rows[range.clone()];
        let mut n_left = 0;
        for i in 0..slice.len() {
            let r = slice[i];
            if go_left(r) {
                slice[n_left] = r;
                n_left += 1;
            } else {
                scratch.push(r);
            }
        }
        slice[n_left..].copy_from_slice(&scratch);
        debug_assert_eq!(n_left as u64, best.left.count);
        let left_range = range.start..range.start + n_left;
        let right_range = range.start + n_left..range.end;

        let left = nodes.len();
        let right = left + 1;
        nodes[node] = Node::Split {
            feature: best.feature,
            bin_threshold: best.bin_threshold,
            threshold: binned.edges[best.feature].upper(best.bin_threshold),
            missing_goes_left: best.missing_goes_left,
            left,
            right,
            gain: best.gain,
        };
        nodes.push(Node::Leaf { value: F::zero() });
        nodes.push(Node::Leaf { value: F::zero() });
        sums.push(best.left);
        sums.push(best.right);
        n_leaves += 1;

        let build_left = left_range.len() <= right_range.len();
        let small_range = if build_left {
            left_range.clone()
        } else {
            right_range.clone()
        };
        let small = workers.build_histogram(binned, &rows[small_range], grad, hess);
        let mut large = parent_hist;
        large.subtract(&small);
        let (left_hist, right_hist) = if build_left { (small, large) } else { (large, small) };
        let masks = (next_mask(), next_mask());
        consider(
            left_hist,
            left,
            depth + 1,
            left_range,
            &best.left,
            masks.0,
            &mut open,
            &mut done,
        );
        consider(
            right_hist,
            right,
            depth + 1,
            right_range,
            &best.right,
            masks.1,
            &mut open,
            &mut done,
        );
    }
    done.extend(open.into_iter().map(|o| (o.node, o.range)));
    done.sort_by_key(|(node, _)| *node);

    for (node, _) in &done {
        nodes[*node] = Node::Leaf {
            value: params.split.rule.leaf_value(&sums[*node])?,
        };
    }
    Ok(GrownTree {
        tree: DecisionTree { nodes },
        rows,
        leaves: done,
    })
}
