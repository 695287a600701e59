//! Shared helpers for the integration tests: an exact-greedy reference tree
//! grower working on raw values, and random dataset builders.

#![allow(dead_code)]

use jampred::ingest::FeatureMatrix;
use jampred::trees::Node;
use rand::Rng;

/// A node of the reference tree.
#[derive(Clone, Debug)]
pub enum RefNode {
    Split {
        feature: usize,
        threshold_index: usize,
        threshold: f64,
        missing_goes_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Copy, Debug)]
pub struct RefParams {
    pub max_depth: usize,
    pub max_leaves: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

struct Candidate {
    feature: usize,
    index: usize,
    threshold: f64,
    missing_goes_left: bool,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Exhaustive search over every raw-value threshold of every feature.
///
/// Thresholds are the midpoints between consecutive distinct values of the
/// whole column; a final "present vs missing" candidate sits after the
/// largest value. Ties keep the first candidate in (feature, threshold,
/// missing-left-first) order.
fn best_split(
    x: &[Vec<f64>],
    g: &[f64],
    h: &[f64],
    rows: &[usize],
    columns: &[Vec<f64>],
    p: &RefParams,
) -> Option<Candidate> {
    let sum = |rs: &[usize], v: &[f64]| rs.iter().map(|&r| v[r]).sum::<f64>();
    let (gp, hp) = (sum(rows, g), sum(rows, h));
    let mut best: Option<Candidate> = None;
    for (f, distinct) in columns.iter().enumerate() {
        let has_missing = rows.iter().any(|&r| x[r][f].is_nan());
        for (j, &v) in distinct.iter().enumerate() {
            let last = j + 1 == distinct.len();
            let threshold = if last {
                f64::MAX
            } else {
                let hi = distinct[j + 1];
                let mid = v + (hi - v) * 0.5;
                if mid < hi {
                    mid
                } else {
                    v
                }
            };
            let placements: &[bool] = match (last, has_missing) {
                (false, false) => &[true],
                (false, true) => &[true, false],
                (true, true) => &[false],
                (true, false) => &[],
            };
            for &mleft in placements {
                let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| {
                    let xv = x[r][f];
                    if xv.is_nan() {
                        mleft
                    } else {
                        xv <= threshold
                    }
                });
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let (gl, hl, gr, hr) = (sum(&left, g), sum(&left, h), sum(&right, g), sum(&right, h));
                if hl < p.min_child_weight || hr < p.min_child_weight {
                    continue;
                }
                let gain =
                    0.5 * (score(gl, hl, p.lambda) + score(gr, hr, p.lambda) - score(gp, hp, p.lambda)) - p.gamma;
                if !gain.is_finite() || gain <= 0.0 {
                    continue;
                }
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature: f,
                        index: j,
                        threshold,
                        missing_goes_left: mleft,
                        gain,
                        left,
                        right,
                    });
                }
            }
        }
    }
    best
}

/// Best-first exact-greedy tree over raw rows `x` (NaN = missing).
pub fn reference_tree(x: &[Vec<f64>], g: &[f64], h: &[f64], p: &RefParams) -> Vec<RefNode> {
    let n_features = x.first().map_or(0, Vec::len);
    let columns: Vec<Vec<f64>> = (0..n_features)
        .map(|f| {
            let mut c: Vec<f64> = x.iter().map(|r| r[f]).filter(|v| !v.is_nan()).collect();
            c.sort_by(f64::total_cmp);
            c.dedup();
            c
        })
        .collect();
    let leaf = |rows: &[usize]| {
        let gs: f64 = rows.iter().map(|&r| g[r]).sum();
        let hs: f64 = rows.iter().map(|&r| h[r]).sum();
        RefNode::Leaf {
            value: -gs / (hs + p.lambda),
        }
    };

    let all: Vec<usize> = (0..x.len()).collect();
    let mut nodes = vec![leaf(&all)];
    // (node, depth, candidate)
    let mut open: Vec<(usize, usize, Candidate)> = Vec::new();
    let push = |open: &mut Vec<(usize, usize, Candidate)>, node: usize, depth: usize, rows: &[usize]| {
        if depth < p.max_depth {
            if let Some(c) = best_split(x, g, h, rows, &columns, p) {
                open.push((node, depth, c));
            }
        }
    };
    push(&mut open, 0, 0, &all);
    let mut n_leaves = 1;
    while n_leaves < p.max_leaves && !open.is_empty() {
        let mut pick = 0;
        for i in 1..open.len() {
            let (a, b) = (&open[pick], &open[i]);
            if b.2.gain > a.2.gain || (b.2.gain == a.2.gain && b.0 < a.0) {
                pick = i;
            }
        }
        let (node, depth, c) = open.remove(pick);
        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes[node] = RefNode::Split {
            feature: c.feature,
            threshold_index: c.index,
            threshold: c.threshold,
            missing_goes_left: c.missing_goes_left,
            left,
            right,
            gain: c.gain,
        };
        nodes.push(leaf(&c.left));
        nodes.push(leaf(&c.right));
        n_leaves += 1;
        push(&mut open, left, depth + 1, &c.left);
        push(&mut open, right, depth + 1, &c.right);
    }
    nodes
}

/// Node-for-node comparison; `Err` describes the first difference.
pub fn compare_trees(ours: &[Node<f64>], reference: &[RefNode], tol: f64) -> Result<(), String> {
    if ours.len() != reference.len() {
        return Err(format!("{} nodes vs reference {}", ours.len(), reference.len()));
    }
    for (i, (a, b)) in ours.iter().zip(reference).enumerate() {
        match (a, b) {
            (Node::Leaf { value: va }, RefNode::Leaf { value: vb }) => {
                if (va - vb).abs() > tol {
                    return Err(format!("node {i}: leaf {va} vs {vb}"));
                }
            }
            (
                Node::Split {
                    feature,
                    bin_threshold,
                    threshold,
                    missing_goes_left,
                    left,
                    right,
                    gain,
                },
                RefNode::Split {
                    feature: f2,
                    threshold_index,
                    threshold: t2,
                    missing_goes_left: m2,
                    left: l2,
                    right: r2,
                    gain: g2,
                },
            ) => {
                if (feature, bin_threshold, missing_goes_left, left, right) != (f2, threshold_index, m2, l2, r2)
                    || threshold != t2
                {
                    return Err(format!("node {i}: {a:?} vs {b:?}"));
                }
                if (gain - g2).abs() > tol {
                    return Err(format!("node {i}: gain {gain} vs {g2}"));
                }
            }
            _ => return Err(format!("node {i}: {a:?} vs {b:?}")),
        }
    }
    Ok(())
}

/// A random small dataset on a dyadic grid, so every gradient sum is exact
/// and tie-breaking is reproducible: values in `0..levels` (some missing),
/// gradients in multiples of 1/16 and hessians in (0, 1].
pub struct ToyData {
    pub x: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub params: RefParams,
}

pub fn toy_data<R: Rng>(rng: &mut R) -> ToyData {
    let n = rng.gen_range(2..=200);
    let nf = rng.gen_range(1..=4);
    let levels: Vec<u32> = (0..nf).map(|_| rng.gen_range(1..=30)).collect();
    let missing_rate = if rng.gen_bool(0.5) { 0.0 } else { 0.1 };
    let x = (0..n)
        .map(|_| {
            levels
                .iter()
                .map(|&l| {
                    if rng.gen_bool(missing_rate) {
                        f64::NAN
                    } else {
                        rng.gen_range(0..l) as f64 * 0.5
                    }
                })
                .collect()
        })
        .collect();
    let g = (0..n).map(|_| rng.gen_range(-32i32..=32) as f64 / 16.0).collect();
    let h = (0..n).map(|_| rng.gen_range(1u32..=16) as f64 / 16.0).collect();
    let params = RefParams {
        max_depth: rng.gen_range(1..=6),
        max_leaves: rng.gen_range(2..=40),
        lambda: [0.0, 0.5, 1.0, 2.0][rng.gen_range(0..4)],
        gamma: [0.0, 0.0, 0.125][rng.gen_range(0..3)],
        min_child_weight: [0.0, 0.25, 1.0][rng.gen_range(0..3)],
    };
    ToyData { x, g, h, params }
}

pub fn to_matrix(x: &[Vec<f64>]) -> FeatureMatrix<f64> {
    FeatureMatrix::from_rows(x, &vec![false; x.len()]).expect("rectangular rows")
}
