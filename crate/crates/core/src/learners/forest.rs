//! Bagged CART regression forest.

use ndarray::{Array1, ArrayView2};
use rand::Rng as _;
use rayon::prelude::*;

use super::tree::{RegressionTree, TreeParams};
use crate::data::Dataset;
use crate::model::Predictor;
use crate::seed::RngSeed;

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Features tried per split; `None` means max(1, p / 3).
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: None, max_features: None, bootstrap: true, min_leaf: 1 }
    }
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: &ForestParams, seed: RngSeed) -> RandomForest {
        let n = data.n();
        let p = data.p();
        let x = data.features();
        let y = data.target().insert_axis(ndarray::Axis(1));
        let candidates: Vec<usize> = (0..p).collect();
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            max_features: Some(params.max_features.unwrap_or((p / 3).max(1)).min(p)),
            max_leaves: None,
            min_gain: 0.0,
            require_evidence: false,
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed.derive(t as u64).rng();
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                RegressionTree::fit(x, y, rows, &candidates, &tree_params, &mut rng)
            })
            .collect();
        RandomForest { trees }
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }
}

impl Predictor for RandomForest {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let k = self.trees.len() as f64;
        let x = x.as_standard_layout();
        let flat = x.as_slice().expect("standard layout");
        let p = x.ncols();
        let mut out = Array1::<f64>::zeros(x.nrows());
        // tree-major keeps one tree's nodes hot in cache
        for t in &self.trees {
            for (o, row) in out.iter_mut().zip(flat.chunks_exact(p.max(1))) {
                *o += t.predict_slice(row);
            }
        }
        out /= k;
        out
    }
}
