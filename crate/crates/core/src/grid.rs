//! Evaluation grids for a single feature.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::seed::RngSeed;
use crate::stats;

pub const DEFAULT_GRID_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridStrategy {
    Equidistant,
    #[default]
    Quantile,
    Subsample,
}

impl GridStrategy {
    pub fn name(self) -> &'static str {
        match self {
            GridStrategy::Equidistant => "equidistant",
            GridStrategy::Quantile => "quantile",
            GridStrategy::Subsample => "subsample",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "equidistant" => Some(GridStrategy::Equidistant),
            "quantile" => Some(GridStrategy::Quantile),
            "subsample" => Some(GridStrategy::Subsample),
            _ => None,
        }
    }
}

/// Strictly increasing evaluation points for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub feature_index: usize,
    pub values: Vec<f64>,
    pub strategy: GridStrategy,
}

impl Grid {
    /// Grid from explicit values; they must be strictly increasing.
    pub fn from_values(feature_index: usize, values: Vec<f64>, strategy: GridStrategy) -> Result<Grid> {
        if values.len() < 2 {
            return invalid("grid needs at least two points");
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("grid values must be strictly increasing");
        }
        Ok(Grid { feature_index, values, strategy })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Builds a grid for feature `feature_index`.
///
/// * equidistant: `size` evenly spaced points from the observed min to max
/// * quantile: empirical quantiles at `k / (size - 1)`, duplicates removed
/// * subsample: `size` distinct observed values drawn without replacement
///   (fewer when the feature has fewer distinct values), sorted
///
/// `seed` is only consumed by the subsample strategy.
pub fn build_grid(
    data: &Dataset,
    feature_index: usize,
    strategy: GridStrategy,
    size: usize,
    seed: RngSeed,
) -> Result<Grid> {
    data.check_feature(feature_index)?;
    if size < 2 {
        return invalid(format!("grid size {size} < 2"));
    }
    let col = stats::sorted(&data.column(feature_index).to_vec());
    let (lo, hi) = (col[0], col[col.len() - 1]);
    if lo == hi {
        return Err(Error::DegenerateFeature(feature_index));
    }
    let values = match strategy {
        GridStrategy::Equidistant => {
            let step = (hi - lo) / (size - 1) as f64;
            let mut v: Vec<f64> = (0..size).map(|k| lo + step * k as f64).collect();
            v[size - 1] = hi;
            v
        }
        GridStrategy::Quantile => {
            let mut v: Vec<f64> = (0..size)
                .map(|k| stats::quantile_sorted(&col, k as f64 / (size - 1) as f64))
                .collect();
            v.dedup();
            v
        }
        GridStrategy::Subsample => {
            if size > data.n() {
                return invalid(format!("subsample grid size {size} exceeds n = {}", data.n()));
            }
            let mut distinct = col.clone();
            distinct.dedup();
            distinct.shuffle(&mut seed.rng());
            distinct.truncate(size);
            distinct.sort_by(|a, b| a.total_cmp(b));
            distinct
        }
    };
    Grid::from_values(feature_index, values, strategy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};

    fn column_data(values: &[f64]) -> Dataset {
        let n = values.len();
        let x = Array2::from_shape_vec((n, 1), values.to_vec()).unwrap();
        Dataset::from_arrays(x, Array1::zeros(n)).unwrap()
    }

    #[test]
    fn equidistant_on_integer_range() {
        let d = column_data(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        let g = build_grid(&d, 0, GridStrategy::Equidistant, 5, RngSeed(0)).unwrap();
        assert_eq!(g.values, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn equidistant_fills_outlier_gap_with_unobserved_values() {
        let d = column_data(&[0.0, 0.0, 0.0, 0.0, 100.0]);
        let g = build_grid(&d, 0, GridStrategy::Equidistant, 5, RngSeed(0)).unwrap();
        assert_eq!(g.values, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        // the quantile grid only keeps observed support
        let q = build_grid(&d, 0, GridStrategy::Quantile, 5, RngSeed(0)).unwrap();
        assert_eq!(q.values, vec![0.0, 100.0]);
    }

    #[test]
    fn errors() {
        let d = column_data(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            build_grid(&d, 0, GridStrategy::Quantile, 5, RngSeed(0)),
            Err(Error::DegenerateFeature(0))
        ));
        let d = column_data(&[1.0, 2.0, 3.0]);
        assert!(build_grid(&d, 0, GridStrategy::Quantile, 1, RngSeed(0)).is_err());
        assert!(build_grid(&d, 0, GridStrategy::Subsample, 4, RngSeed(0)).is_err());
        assert!(build_grid(&d, 3, GridStrategy::Quantile, 3, RngSeed(0)).is_err());
    }

    #[test]
    fn subsample_uses_observed_values() {
        let vals: Vec<f64> = (0..50).map(|i| (i as f64).sqrt()).collect();
        let d = column_data(&vals);
        let g = build_grid(&d, 0, GridStrategy::Subsample, 10, RngSeed(3)).unwrap();
        assert_eq!(g.len(), 10);
        assert!(g.values.iter().all(|v| vals.contains(v)));
        let again = build_grid(&d, 0, GridStrategy::Subsample, 10, RngSeed(3)).unwrap();
        assert_eq!(g, again);
    }
}
