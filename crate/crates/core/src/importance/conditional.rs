//! Subgroup-based conditional sampling.
//!
//! A CART tree partitions the data using the conditioning features so that
//! the target features are as homogeneous as possible inside each leaf.
//! Exchanging values only between rows of the same leaf approximates a
//! draw from the conditional distribution.

use ndarray::Array2;
use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::learners::tree::{RegressionTree, TreeParams};
use crate::seed::RngSeed;
use crate::stats;

pub const MIN_LEAF_SIZE: usize = 20;
pub const DEFAULT_MAX_LEAVES: usize = 32;

#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    targets: Vec<usize>,
    conditioning: Vec<usize>,
    tree: Option<RegressionTree>,
    /// Leaf of every row of the fitting data.
    leaves: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ConditionalSampler {
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn conditioning(&self) -> &[usize] {
        &self.conditioning
    }

    pub fn n_leaves(&self) -> usize {
        self.members.len()
    }

    /// Leaf id of each row of `data`.
    pub fn leaf_assignments(&self, data: &Dataset) -> Vec<usize> {
        match &self.tree {
            None => vec![0; data.n()],
            Some(t) => data.features().outer_iter().map(|r| t.leaf_of(r)).collect(),
        }
    }

    /// Leaves of the rows the sampler was fitted on.
    pub fn fitted_leaves(&self) -> &[usize] {
        &self.leaves
    }

    /// Fitting-data rows in each leaf, in row order.
    pub fn leaf_members(&self) -> &[Vec<usize>] {
        &self.members
    }
}

/// Sampler for one feature conditioned on all remaining features.
///
/// With fewer than `2 * MIN_LEAF_SIZE` rows the sampler falls back to a
/// single leaf (marginal permutation) and logs a warning.
pub fn fit_conditional_sampler(
    data: &Dataset,
    feature_index: usize,
    max_leaves: usize,
    seed: RngSeed,
) -> Result<ConditionalSampler> {
    data.check_feature(feature_index)?;
    let conditioning: Vec<usize> = (0..data.p()).filter(|&j| j != feature_index).collect();
    fit_subset_sampler(data, &[feature_index], &conditioning, max_leaves, seed)
}

/// Sampler for a block of `targets` given the `conditioning` features.
/// Targets are standardized before the joint variance-reduction split
/// search; splits need more gain than noise alone would produce.
pub fn fit_subset_sampler(
    data: &Dataset,
    targets: &[usize],
    conditioning: &[usize],
    max_leaves: usize,
    seed: RngSeed,
) -> Result<ConditionalSampler> {
    if max_leaves == 0 {
        return invalid("max_leaves must be >= 1");
    }
    if targets.is_empty() {
        return invalid("conditional sampler needs at least one target feature");
    }
    for &j in targets.iter().chain(conditioning) {
        data.check_feature(j)?;
    }
    if conditioning.iter().any(|c| targets.contains(c)) {
        return invalid("a feature cannot be both sampled and conditioned on");
    }
    let n = data.n();
    let single = |reason: Option<&str>| {
        if let Some(r) = reason {
            log::warn!("{r}; conditional sampler falls back to marginal permutation");
        }
        ConditionalSampler {
            targets: targets.to_vec(),
            conditioning: conditioning.to_vec(),
            tree: None,
            leaves: vec![0; n],
            members: vec![(0..n).collect()],
        }
    };
    if conditioning.is_empty() || max_leaves == 1 {
        return Ok(single(None));
    }
    if n < 2 * MIN_LEAF_SIZE {
        return Ok(single(Some(&format!("only {n} rows (< {})", 2 * MIN_LEAF_SIZE))));
    }

    let mut t = Array2::<f64>::zeros((n, targets.len()));
    for (k, &j) in targets.iter().enumerate() {
        let col = data.column(j).to_vec();
        let m = stats::mean(&col);
        let s = stats::std_dev(&col);
        let s = if s > 0.0 { s } else { 1.0 };
        for i in 0..n {
            t[[i, k]] = (col[i] - m) / s;
        }
    }
    let params = TreeParams {
        max_depth: None,
        min_leaf: MIN_LEAF_SIZE,
        max_features: None,
        max_leaves: Some(max_leaves),
        min_gain: 0.0,
        require_evidence: true,
    };
    // the seed only fixes the order in which tied candidate features are tried
    let mut candidates = conditioning.to_vec();
    let mut rng = seed.rng();
    candidates.shuffle(&mut rng);
    let tree = RegressionTree::fit(data.features(), t.view(), (0..n).collect(), &candidates, &params, &mut rng);
    let leaves: Vec<usize> = data.features().outer_iter().map(|r| tree.leaf_of(r)).collect();
    let mut members = vec![Vec::new(); tree.n_leaves()];
    for (row, &leaf) in leaves.iter().enumerate() {
        members[leaf].push(row);
    }
    Ok(ConditionalSampler {
        targets: targets.to_vec(),
        conditioning: conditioning.to_vec(),
        tree: Some(tree),
        leaves,
        members,
    })
}
