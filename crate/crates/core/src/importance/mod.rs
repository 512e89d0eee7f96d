//! Feature importance: marginal and conditional permutation importance,
//! grouped permutation importance, Shapley values (exact and sampled),
//! mean-|Shapley| importance and SAGE.

mod conditional;
mod permutation;
mod sage;
mod shapley;

pub use conditional::{fit_conditional_sampler, fit_subset_sampler, ConditionalSampler, DEFAULT_MAX_LEAVES, MIN_LEAF_SIZE};
pub use permutation::{cfi, grouped_pfi, pfi, FeatureGroup};
pub use sage::{sage, sage_with, SageConfig, SageMode};
pub use shapley::{
    default_background, shap_importance, shapley_exact, shapley_sampled, ShapleyExplanation,
    DEFAULT_BACKGROUND_SIZE, MAX_EXACT_FEATURES,
};

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceUnit {
    Feature,
    Group,
}

/// Scores with their replicate distribution.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceResult {
    pub unit: ImportanceUnit,
    pub names: Vec<String>,
    /// Mean of each unit's replicates.
    pub scores: Vec<f64>,
    pub replicates: Vec<Vec<f64>>,
    /// Empirical (q05, q95) of the replicates.
    pub quantile_bands: Vec<(f64, f64)>,
    pub p_values: Option<Vec<f64>>,
}

impl ImportanceResult {
    pub fn from_replicates(unit: ImportanceUnit, names: Vec<String>, replicates: Vec<Vec<f64>>) -> Self {
        let scores = replicates.iter().map(|r| stats::mean(r)).collect();
        let quantile_bands = replicates.iter().map(|r| stats::band_05_95(r)).collect();
        ImportanceResult { unit, names, scores, replicates, quantile_bands, p_values: None }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn band_contains_zero(&self, i: usize) -> bool {
        let (lo, hi) = self.quantile_bands[i];
        lo <= 0.0 && 0.0 <= hi
    }

    pub fn band_half_width(&self, i: usize) -> f64 {
        let (lo, hi) = self.quantile_bands[i];
        0.5 * (hi - lo)
    }

    /// Standard error of the mean score.
    pub fn std_error(&self, i: usize) -> f64 {
        let r = &self.replicates[i];
        stats::std_dev(r) / (r.len() as f64).sqrt()
    }

    /// Unit indices sorted by decreasing score.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]).then(a.cmp(&b)));
        idx
    }

    /// `name,score,q05,q95[,p_value]` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["name", "score", "q05", "q95"];
        if self.p_values.is_some() {
            header.push("p_value");
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let (lo, hi) = self.quantile_bands[i];
            let mut rec = vec![self.names[i].clone(), self.scores[i].to_string(), lo.to_string(), hi.to_string()];
            if let Some(p) = &self.p_values {
                rec.push(p[i].to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
