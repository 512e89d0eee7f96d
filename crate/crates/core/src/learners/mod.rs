//! Built-in regressors: least squares, k-nearest neighbours, RBF kernel
//! ridge and a bagged CART forest, plus oracle predictors for the
//! registered DGPs.

mod forest;
mod kernel;
mod linear;
pub mod tree;

pub use forest::{ForestParams, RandomForest};
pub use kernel::{median_heuristic_gamma, KernelRidgeModel, KnnModel};
pub use linear::{LinearModel, SINGULAR_JITTER};

use ndarray::{Array1, ArrayView2};
use serde::Serialize;

use crate::data::Dataset;
use crate::dgp::DgpId;
use crate::error::{invalid, Error, Result};
use crate::model::Predictor;
use crate::seed::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    OlsLinear,
    Knn {
        k: usize,
    },
    KernelRidgeRbf {
        lambda: f64,
        /// `None` selects the median heuristic.
        gamma: Option<f64>,
    },
    RandomForest {
        n_trees: usize,
        max_depth: Option<usize>,
        max_features: Option<usize>,
        bootstrap: bool,
        min_leaf: usize,
    },
    /// Ignores the training data and returns the DGP's structural mean.
    Oracle {
        dgp: DgpId,
    },
}

impl LearnerSpec {
    /// Unlimited-depth forest with 100 trees.
    pub fn deep_forest() -> LearnerSpec {
        LearnerSpec::forest(100)
    }

    pub fn forest(n_trees: usize) -> LearnerSpec {
        LearnerSpec::RandomForest {
            n_trees,
            max_depth: None,
            max_features: None,
            bootstrap: true,
            min_leaf: 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::OlsLinear => "ols_linear",
            LearnerSpec::Knn { .. } => "knn",
            LearnerSpec::KernelRidgeRbf { .. } => "kernel_ridge_rbf",
            LearnerSpec::RandomForest { .. } => "random_forest",
            LearnerSpec::Oracle { .. } => "oracle",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LearnerSpec::Knn { k } if k == 0 => invalid("knn: k must be >= 1"),
            LearnerSpec::KernelRidgeRbf { lambda, gamma } => {
                if !(lambda > 0.0) {
                    return invalid("kernel ridge: lambda must be > 0");
                }
                if gamma.is_some_and(|g| !(g > 0.0)) {
                    return invalid("kernel ridge: gamma must be > 0");
                }
                Ok(())
            }
            LearnerSpec::RandomForest { n_trees, max_depth, max_features, min_leaf, .. } => {
                if n_trees == 0 {
                    return invalid("random forest: n_trees must be >= 1");
                }
                if max_depth == Some(0) || max_features == Some(0) || min_leaf == 0 {
                    return invalid("random forest: depth, features per split and leaf size must be positive");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// A trained model. Immutable; usable as a [`Predictor`] from any thread.
#[derive(Debug, Clone)]
pub enum FittedModel {
    Linear(LinearModel),
    Knn(KnnModel),
    KernelRidge(KernelRidgeModel),
    Forest(RandomForest),
    Oracle(OraclePredictor),
}

impl FittedModel {
    pub fn as_linear(&self) -> Option<&LinearModel> {
        match self {
            FittedModel::Linear(m) => Some(m),
            _ => None,
        }
    }
}

impl Predictor for FittedModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        match self {
            FittedModel::Linear(m) => m.predict(x),
            FittedModel::Knn(m) => m.predict(x),
            FittedModel::KernelRidge(m) => m.predict(x),
            FittedModel::Forest(m) => m.predict(x),
            FittedModel::Oracle(m) => m.predict(x),
        }
    }
}

/// Trains `spec` on `data`; the seed drives bootstrap and feature sampling.
pub fn fit(spec: &LearnerSpec, data: &Dataset, seed: RngSeed) -> Result<FittedModel> {
    spec.validate()?;
    Ok(match *spec {
        LearnerSpec::OlsLinear => {
            if data.n() < 2 {
                return Err(Error::Fit("least squares needs at least two rows".into()));
            }
            FittedModel::Linear(LinearModel::fit(data))
        }
        LearnerSpec::Knn { k } => FittedModel::Knn(KnnModel::fit(data, k)?),
        LearnerSpec::KernelRidgeRbf { lambda, gamma } => {
            FittedModel::KernelRidge(KernelRidgeModel::fit(data, lambda, gamma)?)
        }
        LearnerSpec::RandomForest { n_trees, max_depth, max_features, bootstrap, min_leaf } => {
            let params = ForestParams { n_trees, max_depth, max_features, bootstrap, min_leaf };
            FittedModel::Forest(RandomForest::fit(data, &params, seed))
        }
        LearnerSpec::Oracle { dgp } => {
            if dgp.p() != data.p() {
                return invalid(format!("oracle for {} expects {} features", dgp.name(), dgp.p()));
            }
            FittedModel::Oracle(OraclePredictor { dgp })
        }
    })
}

/// Noise-free structural mean of a registered DGP.
#[derive(Debug, Clone, Copy)]
pub struct OraclePredictor {
    dgp: DgpId,
}

impl Predictor for OraclePredictor {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.outer_iter().map(|row| self.dgp.mean(row)).collect()
    }
}

pub fn oracle_predictor(dgp_id: &str) -> Result<OraclePredictor> {
    Ok(OraclePredictor { dgp: DgpId::parse(dgp_id, None, None)? })
}

impl From<DgpId> for OraclePredictor {
    fn from(dgp: DgpId) -> Self {
        OraclePredictor { dgp }
    }
}
