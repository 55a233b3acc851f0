use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training_shape, check_width, order_free_mean, LearnerError, TreeParams};
use crate::matrix::Matrix;

/// Relative slack (against the node's sum of squared deviations) below which
/// two split gains count as equal, and below which a gain counts as zero.
const SPLIT_TOLERANCE: f64 = 1e-12;

/// A node of a flat tree array. The root is node 0.
///
/// Routing: go left iff `x[feature] <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: usize,
        #[serde(rename = "r")]
        right: usize,
    },
    Leaf {
        #[serde(rename = "v")]
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

impl RegressionTree {
    /// Rebuilds a tree from a node array, checking that it is a proper
    /// binary tree rooted at node 0 over `n_features` inputs.
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize) -> Result<Self, String> {
        if nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(format!("node {i} is reachable more than once"));
            }
            seen[i] = true;
            match nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(format!("node {i}: feature {feature} out of range (width {n_features})"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for child in [left, right] {
                        if child >= nodes.len() {
                            return Err(format!(
                                "node {i}: child index {child} out of range ({} nodes)",
                                nodes.len()
                            ));
                        }
                        stack.push(child);
                    }
                }
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(format!("node {i}: non-finite leaf value"));
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node {i} is unreachable from the root"));
        }
        Ok(RegressionTree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    /// Index of the leaf `x` is routed to. `x` must have the tree's width.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
                TreeNode::Leaf { .. } => return i,
            }
        }
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)] {
            TreeNode::Leaf { value } => value,
            TreeNode::Split { .. } => unreachable!("leaf_index stops at a leaf"),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearnerError> {
        check_width(self.n_features, x)?;
        Ok(self.predict_unchecked(x))
    }

    /// The root split as `(feature, threshold)`, or `None` for a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            TreeNode::Split { feature, threshold, .. } => Some((feature, threshold)),
            TreeNode::Leaf { .. } => None,
        }
    }
}

/// Fits a regression tree by best-first growth.
///
/// Starting from a single leaf, the leaf whose best split removes the most
/// squared error is split (ties go to the lowest node index) until
/// `max_leaves` leaves exist or no split reduces the error. Within a node,
/// candidate thresholds are midpoints between adjacent distinct feature
/// values, both children must keep `min_samples_leaf` rows, and gain ties go
/// to the lowest feature index, then the lowest threshold. Leaf values are
/// the mean of the routed targets.
pub fn fit_tree(x: &Matrix, y: &[f64], params: &TreeParams) -> Result<RegressionTree, LearnerError> {
    check_training_shape(x.n_rows(), y.len())?;
    validate_growth(params)?;
    Ok(grow(x, y, (0..x.n_rows()).collect(), params, None))
}

pub(crate) fn validate_growth(params: &TreeParams) -> Result<(), LearnerError> {
    TreeParams {
        learning_rate: 1.0,
        num_trees: 1,
        ..*params
    }
    .validate()
}

/// Per-split feature subsampling for forests.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub per_split: usize,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    split: Option<Split>,
}

/// Grows a tree over `rows` (which may repeat, for bootstrap samples).
pub(crate) fn grow(
    x: &Matrix,
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    mut sampler: Option<FeatureSampler<'_>>,
) -> RegressionTree {
    let p = x.n_cols();
    let mut nodes = vec![TreeNode::Leaf {
        value: order_free_mean(rows.iter().map(|&i| y[i])),
    }];
    let split = best_split(
        x,
        y,
        &rows,
        params.min_samples_leaf,
        &features_for_split(p, &mut sampler),
    );
    let mut open = vec![OpenLeaf { node: 0, rows, split }];
    let mut leaves = 1;

    while leaves < params.max_leaves {
        let mut pick: Option<usize> = None;
        for (k, leaf) in open.iter().enumerate() {
            if let Some(s) = &leaf.split {
                let better = match pick {
                    None => true,
                    Some(b) => s.gain > open[b].split.as_ref().map_or(f64::NEG_INFINITY, |t| t.gain),
                };
                if better {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let leaf = open.remove(k);
        let split = leaf.split.expect("picked leaves have a split");
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf
            .rows
            .iter()
            .partition(|&&i| x.get(i, split.feature) <= split.threshold);

        let (left, right) = (nodes.len(), nodes.len() + 1);
        nodes.push(TreeNode::Leaf {
            value: order_free_mean(left_rows.iter().map(|&i| y[i])),
        });
        nodes.push(TreeNode::Leaf {
            value: order_free_mean(right_rows.iter().map(|&i| y[i])),
        });
        nodes[leaf.node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        leaves += 1;

        for (node, rows) in [(left, left_rows), (right, right_rows)] {
            let split = best_split(
                x,
                y,
                &rows,
                params.min_samples_leaf,
                &features_for_split(p, &mut sampler),
            );
            open.push(OpenLeaf { node, rows, split });
        }
    }
    RegressionTree { nodes, n_features: p }
}

fn features_for_split(p: usize, sampler: &mut Option<FeatureSampler<'_>>) -> Vec<usize> {
    match sampler {
        Some(s) if s.per_split < p => {
            let mut f = index::sample(s.rng, p, s.per_split).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..p).collect(),
    }
}

/// Best split of `rows` over `features`, or `None` if no admissible split
/// reduces the squared error.
///
/// Targets are centred on the node mean, and each feature's (value, target)
/// pairs are sorted before accumulating, so the result is independent of
/// the order of `rows`.
fn best_split(x: &Matrix, y: &[f64], rows: &[usize], min_leaf: usize, features: &[usize]) -> Option<Split> {
    let n = rows.len();
    if n < 2 * min_leaf || n < 2 {
        return None;
    }
    let mean = order_free_mean(rows.iter().map(|&i| y[i]));
    let mut centred: Vec<f64> = rows.iter().map(|&i| y[i] - mean).collect();
    centred.sort_by(f64::total_cmp);
    let scale: f64 = centred.iter().map(|c| c * c).sum();
    if scale == 0.0 {
        return None;
    }
    let total: f64 = centred.iter().sum();
    let parent = total * total / n as f64;
    let tol = SPLIT_TOLERANCE * scale;

    let mut best: Option<Split> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    let mut suffix = vec![0.0; n + 1];
    for &f in features {
        pairs.clear();
        pairs.extend(rows.iter().map(|&i| (x.get(i, f), y[i] - mean)));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for i in (0..n).rev() {
            suffix[i] = suffix[i + 1] + pairs[i].1;
        }

        let mut left = 0.0;
        for i in 0..n - 1 {
            left += pairs[i].1;
            let (n_left, n_right) = (i + 1, n - i - 1);
            if n_right < min_leaf {
                break;
            }
            if n_left < min_leaf || pairs[i].0 == pairs[i + 1].0 {
                continue;
            }
            let right = suffix[i + 1];
            let gain = left * left / n_left as f64 + right * right / n_right as f64 - parent;
            if gain <= tol || best.as_ref().is_some_and(|b| gain <= b.gain + tol) {
                continue;
            }
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            let mid = 0.5 * (lo + hi);
            best = Some(Split {
                feature: f,
                threshold: if mid < hi { mid } else { lo },
                gain,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stump_params() -> TreeParams {
        TreeParams {
            max_leaves: 2,
            min_samples_leaf: 1,
            ..Default::default()
        }
    }

    fn unbounded() -> TreeParams {
        TreeParams {
            max_leaves: usize::MAX,
            min_samples_leaf: 1,
            ..Default::default()
        }
    }

    #[test]
    fn splits_step_function_at_midpoint() {
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0]);
        let tree = fit_tree(&x, &[0.0, 0.0, 10.0, 10.0], &stump_params()).unwrap();
        assert_eq!(tree.root_split(), Some((0, 1.5)));
        assert_eq!(tree.predict(&[0.5]).unwrap(), 0.0);
        assert_eq!(tree.predict(&[1.5]).unwrap(), 0.0);
        assert_eq!(tree.predict(&[1.6]).unwrap(), 10.0);
        assert_eq!(tree.leaf_count(), 2);
    }

    #[test]
    fn constant_targets_give_one_leaf() {
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let tree = fit_tree(&x, &[0.1; 5], &unbounded()).unwrap();
        assert_eq!(tree.nodes(), &[TreeNode::Leaf { value: 0.1 }]);
        assert_eq!(tree.predict(&[99.0]).unwrap(), 0.1);
    }

    #[test]
    fn errors() {
        let x = Matrix::new(0, 1, vec![]).unwrap();
        assert_eq!(
            fit_tree(&x, &[], &stump_params()).unwrap_err(),
            LearnerError::EmptyTrainingSet
        );
        let x = Matrix::column(&[1.0]);
        let tree = fit_tree(&x, &[1.0], &stump_params()).unwrap();
        assert_eq!(
            tree.predict(&[1.0, 2.0]).unwrap_err(),
            LearnerError::WidthMismatch { expected: 1, found: 2 }
        );
    }

    #[test]
    fn min_samples_leaf_is_honoured() {
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let y = [100.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let params = TreeParams {
            max_leaves: 2,
            min_samples_leaf: 2,
            ..Default::default()
        };
        let tree = fit_tree(&x, &y, &params).unwrap();
        assert_eq!(tree.root_split(), Some((0, 1.5)));
    }

    #[test]
    fn best_first_expands_largest_gain() {
        // Left half is nearly flat, right half has a big step: the second
        // split must go to the right child.
        let x = Matrix::column(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let y = [0.0, 1.0, 0.0, 1.0, 100.0, 100.0, 120.0, 120.0];
        let params = TreeParams {
            max_leaves: 3,
            min_samples_leaf: 1,
            ..Default::default()
        };
        let tree = fit_tree(&x, &y, &params).unwrap();
        assert_eq!(tree.root_split(), Some((0, 3.5)));
        match tree.nodes()[2] {
            TreeNode::Split { threshold, .. } => assert_eq!(threshold, 5.5),
            other => panic!("right child should split, got {other:?}"),
        }
    }

    #[test]
    fn greedy_growth_stops_on_xor() {
        // Every axis-aligned split of XOR leaves both child means equal, so no
        // single split reduces the error and growth stops at the root.
        let x = Matrix::new(4, 2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.0]).unwrap();
        let tree = fit_tree(&x, &[0.0, 0.0, 1.0, 1.0], &unbounded()).unwrap();
        assert_eq!(tree.leaf_count(), 1);
    }

    #[test]
    fn rejects_malformed_node_arrays() {
        let leaf = TreeNode::Leaf { value: 1.0 };
        let bad_child = vec![
            TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 5,
            },
            leaf,
            leaf,
        ];
        assert!(RegressionTree::from_nodes(bad_child, 1).is_err());
        let shared = vec![
            TreeNode::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 1,
            },
            leaf,
        ];
        assert!(RegressionTree::from_nodes(shared, 1).is_err());
        let orphan = vec![leaf, leaf];
        assert!(RegressionTree::from_nodes(orphan, 1).is_err());
        let bad_feature = vec![
            TreeNode::Split {
                feature: 3,
                threshold: 0.0,
                left: 1,
                right: 2,
            },
            leaf,
            leaf,
        ];
        assert!(RegressionTree::from_nodes(bad_feature, 1).is_err());
    }

    /// Brute-force root split: every (feature, midpoint) candidate, SSE
    /// computed directly from the two child means.
    fn oracle_root_split(x: &Matrix, y: &[f64], min_leaf: usize) -> Option<(usize, f64)> {
        fn sse(v: &[f64]) -> f64 {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|t| (t - m) * (t - m)).sum()
        }
        let parent = sse(y);
        let tol = 1e-9 * parent.max(1e-300);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x.n_cols() {
            let mut vals: Vec<f64> = (0..x.n_rows()).map(|i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<f64>, Vec<f64>) =
                    (0..x.n_rows())
                        .map(|i| (x.get(i, f), y[i]))
                        .fold((vec![], vec![]), |(mut l, mut r), (xv, yv)| {
                            if xv <= t {
                                l.push(yv)
                            } else {
                                r.push(yv)
                            }
                            (l, r)
                        });
                if l.len() < min_leaf || r.len() < min_leaf {
                    continue;
                }
                let reduction = parent - sse(&l) - sse(&r);
                if reduction > tol && best.is_none_or(|(_, _, b)| reduction > b + tol) {
                    best = Some((f, t, reduction));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn small_instance() -> impl Strategy<Value = (Matrix, Vec<f64>, usize)> {
        (1usize..=12, 1usize..=3, 1usize..=3).prop_flat_map(|(n, p, min_leaf)| {
            (
                proptest::collection::vec(0u8..5, n * p),
                proptest::collection::vec(0u8..20, n),
                Just((n, p, min_leaf)),
            )
                .prop_map(|(xs, ys, (n, p, min_leaf))| {
                    let x = Matrix::new(n, p, xs.into_iter().map(f64::from).collect()).unwrap();
                    (x, ys.into_iter().map(f64::from).collect(), min_leaf)
                })
        })
    }

    proptest! {
        #[test]
        fn root_split_matches_brute_force((x, y, min_leaf) in small_instance()) {
            let params = TreeParams { max_leaves: 2, min_samples_leaf: min_leaf, ..Default::default() };
            let tree = fit_tree(&x, &y, &params).unwrap();
            prop_assert_eq!(tree.root_split(), oracle_root_split(&x, &y, min_leaf));
        }

        #[test]
        fn leaves_hold_mean_of_routed_targets((x, y, min_leaf) in small_instance(), leaves in 2usize..8) {
            let params = TreeParams { max_leaves: leaves, min_samples_leaf: min_leaf, ..Default::default() };
            let tree = fit_tree(&x, &y, &params).unwrap();
            prop_assert!(tree.leaf_count() <= leaves);
            for (leaf, node) in tree.nodes().iter().enumerate() {
                if let TreeNode::Leaf { value } = node {
                    let routed: Vec<f64> = (0..x.n_rows())
                        .filter(|&i| tree.leaf_index(x.row(i)) == leaf)
                        .map(|i| y[i])
                        .collect();
                    prop_assert!(routed.len() >= min_leaf.min(x.n_rows()));
                    let mean = routed.iter().sum::<f64>() / routed.len() as f64;
                    prop_assert!((value - mean).abs() <= 1e-9 * mean.abs().max(1.0));
                }
            }
        }

        #[test]
        fn unbounded_tree_interpolates(rows in proptest::collection::btree_map(-100i32..100, -50i32..50, 1..40)) {
            // Distinct feature values, so zero training error is reachable.
            let (xs, ys): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            let x = Matrix::column(&xs.into_iter().map(f64::from).collect::<Vec<_>>());
            let y: Vec<f64> = ys.into_iter().map(f64::from).collect();
            let tree = fit_tree(&x, &y, &unbounded()).unwrap();
            for (i, t) in y.iter().enumerate() {
                prop_assert_eq!(tree.predict(x.row(i)).unwrap(), *t);
            }
        }

        #[test]
        fn row_order_does_not_matter((x, y, min_leaf) in small_instance(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut order: Vec<usize> = (0..x.n_rows()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let xp = x.select_rows(&order);
            let yp: Vec<f64> = order.iter().map(|&i| y[i]).collect();
            let params = TreeParams { max_leaves: 6, min_samples_leaf: min_leaf, ..Default::default() };
            let a = fit_tree(&x, &y, &params).unwrap();
            let b = fit_tree(&xp, &yp, &params).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
