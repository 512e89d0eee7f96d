//! Model-agnostic interpretation toolkit.
//!
//! Effect curves (PDP, ICE, ALE, M-plot), feature importance (permutation,
//! conditional, Shapley, SAGE), interaction strength, dependence tests,
//! uncertainty bands with multiple-testing correction, and an audit layer
//! that flags common misinterpretations. Everything stochastic takes an
//! explicit [`RngSeed`].

pub mod data;
pub mod dependence;
pub mod dgp;
pub mod diagnostics;
pub mod effects;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod importance;
pub mod inference;
pub mod interactions;
pub mod learners;
pub mod model;
pub mod seed;
pub mod stats;

pub use data::{train_test_split, Dataset};
pub use error::{Error, Result};
pub use grid::{build_grid, Grid, GridStrategy};
pub use model::{evaluate, fn_predictor, Loss, Predictor};
pub use seed::RngSeed;
