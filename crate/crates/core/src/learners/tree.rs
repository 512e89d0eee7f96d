//! CART regression trees with variance-reduction splits.
//!
//! Splits are searched exhaustively over midpoints between consecutive
//! distinct sorted values. Targets may have several columns; the split
//! criterion then sums the per-column squared-error reduction. Nodes are
//! expanded best-first so that a leaf budget keeps the most useful splits.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index::sample;

use crate::seed::Rng;

#[derive(Debug, Clone)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` tries every candidate.
    pub max_features: Option<usize>,
    pub max_leaves: Option<usize>,
    /// Minimum decrease in summed squared error for a split to be kept.
    pub min_gain: f64,
    /// Keep a split only when its gain exceeds the largest gain expected
    /// from pure noise: `(2 ln(m c) + 2 q)` times the node's mean squared
    /// error per target column, for `m` rows, `c` tried features and `q`
    /// target columns.
    pub require_evidence: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
            max_leaves: None,
            min_gain: 0.0,
            require_evidence: false,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { value: f64, leaf: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_leaves: usize,
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Pending {
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    split: Option<SplitCandidate>,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        let g = |p: &Pending| p.split.as_ref().map_or(f64::NEG_INFINITY, |s| s.gain);
        // ties broken by node id so the expansion order is deterministic
        g(self).total_cmp(&g(other)).then_with(|| other.node.cmp(&self.node))
    }
}

impl RegressionTree {
    /// Grows a tree on `rows` of `x`, predicting the columns of `targets`
    /// from the `candidates` feature columns.
    pub fn fit(
        x: ArrayView2<'_, f64>,
        targets: ArrayView2<'_, f64>,
        rows: Vec<usize>,
        candidates: &[usize],
        params: &TreeParams,
        rng: &mut Rng,
    ) -> RegressionTree {
        assert!(!rows.is_empty(), "tree fit on empty row set");
        let min_leaf = params.min_leaf.max(1);
        let mut tree = RegressionTree { nodes: Vec::new(), n_leaves: 0 };
        let mut heap = BinaryHeap::new();
        let root_split = best_split(x, targets, &rows, candidates, params, min_leaf, 0, rng);
        tree.nodes.push(Node::Leaf { value: 0.0, leaf: 0 });
        heap.push(Pending { node: 0, depth: 0, rows, split: root_split });
        let mut leaves_open = 1usize;
        let mut finished: Vec<(usize, Vec<usize>)> = Vec::new();

        while let Some(item) = heap.pop() {
            let budget_left = params.max_leaves.is_none_or(|m| leaves_open < m);
            match item.split {
                Some(split) if budget_left => {
                    let left_id = tree.nodes.len();
                    let right_id = left_id + 1;
                    tree.nodes.push(Node::Leaf { value: 0.0, leaf: 0 });
                    tree.nodes.push(Node::Leaf { value: 0.0, leaf: 0 });
                    tree.nodes[item.node] = Node::Split {
                        feature: split.feature,
                        threshold: split.threshold,
                        left: left_id,
                        right: right_id,
                    };
                    leaves_open += 1;
                    let depth = item.depth + 1;
                    for (id, child_rows) in [(left_id, split.left), (right_id, split.right)] {
                        let child_split = best_split(
                            x, targets, &child_rows, candidates, params, min_leaf, depth, rng,
                        );
                        heap.push(Pending { node: id, depth, rows: child_rows, split: child_split });
                    }
                }
                _ => finished.push((item.node, item.rows)),
            }
        }

        finished.sort_by_key(|(node, _)| *node);
        for (leaf, (node, rows)) in finished.into_iter().enumerate() {
            let value = rows.iter().map(|&r| targets[[r, 0]]).sum::<f64>() / rows.len() as f64;
            tree.nodes[node] = Node::Leaf { value, leaf };
            tree.n_leaves += 1;
        }
        tree
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + rec(nodes, left).max(rec(nodes, right)),
            }
        }
        rec(&self.nodes, 0)
    }

    fn find(&self, row: ArrayView1<'_, f64>) -> (f64, usize) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, leaf } => return (value, leaf),
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub(crate) fn predict_slice(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    /// Mean of the first target column in the row's leaf.
    pub fn predict_row(&self, row: ArrayView1<'_, f64>) -> f64 {
        self.find(row).0
    }

    /// Leaf id in `0..n_leaves()`.
    pub fn leaf_of(&self, row: ArrayView1<'_, f64>) -> usize {
        self.find(row).1
    }

    /// Features used in at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    x: ArrayView2<'_, f64>,
    targets: ArrayView2<'_, f64>,
    rows: &[usize],
    candidates: &[usize],
    params: &TreeParams,
    min_leaf: usize,
    depth: usize,
    rng: &mut Rng,
) -> Option<SplitCandidate> {
    let m = rows.len();
    if m < 2 * min_leaf || params.max_depth.is_some_and(|d| depth >= d) || candidates.is_empty() {
        return None;
    }
    let q = targets.ncols();
    let mut total = vec![0.0; q];
    let mut total_sq = 0.0;
    for &r in rows {
        for k in 0..q {
            let t = targets[[r, k]];
            total[k] += t;
            total_sq += t * t;
        }
    }
    let parent_sse = total_sq - total.iter().map(|s| s * s).sum::<f64>() / m as f64;
    if parent_sse <= 1e-12 * total_sq.max(1.0) {
        return None;
    }

    let tried: Vec<usize> = match params.max_features {
        Some(k) if k < candidates.len() => {
            sample(rng, candidates.len(), k.max(1)).into_iter().map(|i| candidates[i]).collect()
        }
        _ => candidates.to_vec(),
    };

    let mut best: Option<(usize, f64, f64)> = None;
    // (value, row) pairs; ties ordered by row id
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(m);
    let mut left = vec![0.0; q];
    for &f in &tried {
        keyed.clear();
        keyed.extend(rows.iter().map(|&r| (x[[r, f]], r)));
        keyed.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if keyed[0].0 == keyed[m - 1].0 {
            continue;
        }
        left.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m - 1 {
            let (here, r) = keyed[i];
            for k in 0..q {
                left[k] += targets[[r, k]];
            }
            let n_left = i + 1;
            let n_right = m - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let next = keyed[i + 1].0;
            if here == next {
                continue;
            }
            // SSE_parent - SSE_left - SSE_right reduces to these mean terms
            let mut score = 0.0;
            for k in 0..q {
                let l = left[k];
                let rr = total[k] - l;
                score += l * l / n_left as f64 + rr * rr / n_right as f64
                    - total[k] * total[k] / m as f64;
            }
            if best.is_none_or(|(_, _, g)| score > g) {
                let mut threshold = 0.5 * (here + next);
                if threshold >= next {
                    threshold = here;
                }
                best = Some((f, threshold, score));
            }
        }
    }

    let (feature, threshold, gain) = best?;
    if gain <= params.min_gain.max(1e-12 * parent_sse) {
        return None;
    }
    if params.require_evidence {
        let per_col_mse = parent_sse / (m * q) as f64;
        let noise_max = 2.0 * ((m * tried.len()) as f64).ln() + 2.0 * q as f64;
        if gain <= noise_max * per_col_mse {
            return None;
        }
    }
    let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| x[[row, feature]] <= threshold);
    Some(SplitCandidate { feature, threshold, gain, left: l, right: r })
}
