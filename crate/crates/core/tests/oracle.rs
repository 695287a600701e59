mod common;

use common::{compare_trees, reference_tree, to_matrix, toy_data, RefNode};
use jampred::parallel::Workers;
use jampred::trees::{grow_tree, quantize, GrowParams, SplitParams, SplitRule};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Returns (splits, splits sending missing values right) of the reference tree.
fn check(seed: u64, n_workers: usize) -> Result<(usize, usize), String> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let d = toy_data(&mut rng);
    let binned = quantize(&to_matrix(&d.x), 256).map_err(|e| e.to_string())?;
    let params = GrowParams {
        max_depth: d.params.max_depth,
        max_leaves: d.params.max_leaves,
        split: SplitParams {
            rule: SplitRule::Regularized {
                lambda: d.params.lambda,
                gamma: d.params.gamma,
            },
            min_child_weight: d.params.min_child_weight,
        },
        features: None,
    };
    let rows = (0..d.x.len() as u32).collect();
    let workers = Workers::new(n_workers).map_err(|e| e.to_string())?;
    let grown = grow_tree(&binned, rows, &d.g, &d.h, &params, &workers).map_err(|e| e.to_string())?;
    let reference = reference_tree(&d.x, &d.g, &d.h, &d.params);
    compare_trees(&grown.tree.nodes, &reference, 1e-9)?;
    let splits = reference.iter().filter(|n| matches!(n, RefNode::Split { .. })).count();
    let missing_right = reference
        .iter()
        .filter(|n| {
            matches!(
                n,
                RefNode::Split {
                    missing_goes_left: false,
                    ..
                }
            )
        })
        .count();
    Ok((splits, missing_right))
}

#[test]
fn trees_match_reference_on_fixed_seeds() {
    let (mut splits, mut missing_right) = (0, 0);
    for seed in 0..200 {
        let (s, m) = check(seed, 1).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        splits += s;
        missing_right += m;
    }
    // the comparison is only meaningful if the trees are non-trivial
    assert!(splits > 1000, "{splits}");
    assert!(missing_right > 20, "{missing_right}");
}

#[test]
fn leaf_partition_matches_tree_routing() {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
    let d = toy_data(&mut rng);
    let m = to_matrix(&d.x);
    let binned = quantize(&m, 256).unwrap();
    let params = GrowParams {
        max_depth: 6,
        max_leaves: 64,
        split: SplitParams {
            rule: SplitRule::Regularized {
                lambda: 1.0,
                gamma: 0.0,
            },
            min_child_weight: 0.0,
        },
        features: None,
    };
    let grown = grow_tree(
        &binned,
        (0..m.n_rows as u32).collect(),
        &d.g,
        &d.h,
        &params,
        &Workers::new(1).unwrap(),
    )
    .unwrap();
    let mut seen = vec![false; m.n_rows];
    for (leaf, range) in &grown.leaves {
        for &r in &grown.rows[range.clone()] {
            assert_eq!(grown.tree.leaf_index(m.row(r as usize)), *leaf);
            seen[r as usize] = true;
        }
    }
    assert!(seen.into_iter().all(|s| s));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trees_match_reference(seed in any::<u64>(), workers in 1usize..4) {
        prop_assert!(check(seed, workers).is_ok(), "{:?}", check(seed, workers));
    }
}
