//! Uncertainty of effect and importance estimates, permutation tests for
//! importance, and multiple-comparison adjustment.

use std::io::Write;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dgp::DgpId;
use crate::effects::pdp;
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::importance::{pfi, ImportanceResult};
use crate::learners::{fit, LearnerSpec};
use crate::model::{Loss, Predictor};
use crate::seed::RngSeed;
use crate::stats;

pub const MIN_CI_REPEATS: usize = 10;
pub const MIN_TARGET_PERMUTATIONS: usize = 20;
/// Share of PIMP refits that must succeed.
pub const MIN_PIMP_SUCCESS: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandSource {
    EstimationOnly,
    Refit,
}

impl BandSource {
    pub fn name(self) -> &'static str {
        match self {
            BandSource::EstimationOnly => "estimation_only",
            BandSource::Refit => "refit",
        }
    }
}

/// Pointwise (q05, q95) band over replicate PDP curves.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyBand {
    pub grid: Grid,
    pub mean_curve: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub source: BandSource,
    pub n_replicates: usize,
    pub replicates: Vec<Vec<f64>>,
}

impl UncertaintyBand {
    fn from_replicates(grid: Grid, source: BandSource, replicates: Vec<Vec<f64>>) -> Self {
        let g = grid.len();
        let mut mean_curve = Vec::with_capacity(g);
        let mut lower = Vec::with_capacity(g);
        let mut upper = Vec::with_capacity(g);
        for k in 0..g {
            let col: Vec<f64> = replicates.iter().map(|r| r[k]).collect();
            let m = stats::mean(&col);
            let (lo, hi) = stats::band_05_95(&col);
            // interpolated quantiles of a skewed sample can exclude the mean
            mean_curve.push(m);
            lower.push(lo.min(m));
            upper.push(hi.max(m));
        }
        UncertaintyBand { grid, mean_curve, lower, upper, source, n_replicates: replicates.len(), replicates }
    }

    /// Band over replicate curves each shifted to mean zero, which removes
    /// level differences and keeps only the shape variation.
    pub fn centered(&self) -> UncertaintyBand {
        let reps = self
            .replicates
            .iter()
            .map(|r| {
                let m = stats::mean(r);
                r.iter().map(|v| v - m).collect()
            })
            .collect();
        UncertaintyBand::from_replicates(self.grid.clone(), self.source, reps)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.upper.iter().zip(&self.lower).map(|(u, l)| u - l).collect()
    }

    pub fn mean_width(&self) -> f64 {
        stats::mean(&self.widths())
    }

    /// Share of grid points where `curve` lies inside the band.
    pub fn coverage(&self, curve: &[f64]) -> f64 {
        let inside = (0..self.grid.len()).filter(|&k| self.lower[k] <= curve[k] && curve[k] <= self.upper[k]).count();
        inside as f64 / self.grid.len() as f64
    }

    /// `grid,mean,lower,upper,source`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["grid", "mean", "lower", "upper", "source"])?;
        for k in 0..self.grid.len() {
            w.write_record([
                self.grid.values[k].to_string(),
                self.mean_curve[k].to_string(),
                self.lower[k].to_string(),
                self.upper[k].to_string(),
                self.source.name().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// PDPs of a fixed model on `n_replicates` seeded subsamples of size
/// `subsample_n`: the Monte Carlo error of the PDP estimate alone.
pub fn pdp_band_estimation<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    grid: &Grid,
    n_replicates: usize,
    subsample_n: usize,
    seed: RngSeed,
) -> Result<UncertaintyBand> {
    if n_replicates < 2 {
        return invalid("a band needs at least 2 replicates");
    }
    if subsample_n == 0 || subsample_n > data.n() {
        return invalid(format!("subsample size {subsample_n} must lie in 1..={}", data.n()));
    }
    let curves = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let sub = data.subsample(subsample_n, seed.derive(r as u64))?;
            Ok(pdp(pred, &sub, grid)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UncertaintyBand::from_replicates(grid.clone(), BandSource::EstimationOnly, curves))
}

/// Where refit replicates get their training data.
#[derive(Debug, Clone, Copy)]
pub enum RefitSource<'a> {
    /// A fresh sample from the generator per replicate.
    Dgp(DgpId),
    /// A bootstrap resample of fixed data per replicate.
    Data(&'a Dataset),
}

/// PDPs of models refitted on fresh data per replicate: estimation error
/// plus the variance of the fitting procedure.
pub fn pdp_band_refit(
    learner: &LearnerSpec,
    source: RefitSource<'_>,
    grid: &Grid,
    n_replicates: usize,
    n_per_fit: usize,
    seed: RngSeed,
) -> Result<UncertaintyBand> {
    if n_replicates < 2 {
        return invalid("a band needs at least 2 replicates");
    }
    if n_per_fit == 0 {
        return invalid("n_per_fit must be >= 1");
    }
    learner.validate()?;
    let curves = (0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let run = || -> Result<Vec<f64>> {
                let data_seed = seed.derive2(r as u64, 0);
                let data = match source {
                    RefitSource::Dgp(dgp) => dgp.sample(n_per_fit, data_seed)?,
                    RefitSource::Data(d) => {
                        let mut rng = data_seed.rng();
                        let rows: Vec<usize> =
                            (0..n_per_fit).map(|_| rand::Rng::random_range(&mut rng, 0..d.n())).collect();
                        d.select_rows(&rows)
                    }
                };
                let model = fit(learner, &data, seed.derive2(r as u64, 1))?;
                Ok(pdp(&model, &data, grid)?.values)
            };
            run().map_err(|e| Error::Replicate { index: r, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UncertaintyBand::from_replicates(grid.clone(), BandSource::Refit, curves))
}

/// Permutation importance with at least [`MIN_CI_REPEATS`] repeats so the
/// replicate quantiles form a usable interval. The model is held fixed.
pub fn pfi_ci<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    repeats: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    if repeats < MIN_CI_REPEATS {
        return invalid(format!("confidence intervals need at least {MIN_CI_REPEATS} repeats, got {repeats}"));
    }
    pfi(pred, data, loss, repeats, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    None,
    Bonferroni,
    Holm,
}

impl Correction {
    pub fn name(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::Bonferroni => "bonferroni",
            Correction::Holm => "holm",
        }
    }

    pub fn parse(s: &str) -> Option<Correction> {
        match s {
            "none" => Some(Correction::None),
            "bonferroni" => Some(Correction::Bonferroni),
            "holm" => Some(Correction::Holm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestedImportance {
    pub names: Vec<String>,
    /// Observed importance per feature, when the p-values came from a test.
    pub observed: Option<Vec<f64>>,
    pub p_values_raw: Vec<f64>,
    pub p_values_adjusted: Vec<f64>,
    pub method: Correction,
    pub alpha: f64,
    pub significant: Vec<bool>,
}

impl TestedImportance {
    pub fn new(
        names: Vec<String>,
        observed: Option<Vec<f64>>,
        raw: Vec<f64>,
        method: Correction,
        alpha: f64,
    ) -> Result<TestedImportance> {
        if names.len() != raw.len() || observed.as_ref().is_some_and(|o| o.len() != raw.len()) {
            return invalid("names, observed values and p-values differ in length");
        }
        let adjusted = adjusted_pvalues(&raw, method)?;
        let significant = adjusted.iter().map(|&p| p < alpha).collect();
        Ok(TestedImportance {
            names,
            observed,
            p_values_raw: raw,
            p_values_adjusted: adjusted,
            method,
            alpha,
            significant,
        })
    }

    /// Same raw p-values under a different correction.
    pub fn with_correction(&self, method: Correction) -> Result<TestedImportance> {
        TestedImportance::new(self.names.clone(), self.observed.clone(), self.p_values_raw.clone(), method, self.alpha)
    }

    pub fn n_significant(&self) -> usize {
        self.significant.iter().filter(|&&s| s).count()
    }

    /// `feature,observed,p_raw,p_adjusted,significant`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "observed", "p_raw", "p_adjusted", "significant"])?;
        for i in 0..self.names.len() {
            let observed = self.observed.as_ref().map_or(String::new(), |o| o[i].to_string());
            w.write_record([
                self.names[i].clone(),
                observed,
                self.p_values_raw[i].to_string(),
                self.p_values_adjusted[i].to_string(),
                self.significant[i].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Bonferroni: `min(1, m p)`. Holm: step-down `(m - k + 1) p_(k)` made
/// monotone by a running maximum over the sorted p-values.
pub fn adjusted_pvalues(raw: &[f64], method: Correction) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return invalid("no p-values to adjust");
    }
    if raw.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return invalid("p-values must lie in (0, 1]");
    }
    let m = raw.len() as f64;
    Ok(match method {
        Correction::None => raw.to_vec(),
        Correction::Bonferroni => raw.iter().map(|&p| (p * m).min(1.0)).collect(),
        Correction::Holm => {
            let mut order: Vec<usize> = (0..raw.len()).collect();
            order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));
            let mut out = vec![0.0; raw.len()];
            let mut running = 0.0f64;
            for (k, &i) in order.iter().enumerate() {
                running = running.max(((m - k as f64) * raw[i]).min(1.0));
                out[i] = running;
            }
            out
        }
    })
}

/// Adjusts anonymous p-values; tests are named `H1..Hm`.
pub fn adjust_pvalues(raw: &[f64], method: Correction, alpha: f64) -> Result<TestedImportance> {
    let names = (1..=raw.len()).map(|i| format!("H{i}")).collect();
    TestedImportance::new(names, None, raw.to_vec(), method, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PimpConfig {
    pub n_target_permutations: usize,
    /// Column permutations averaged into every PFI score.
    pub pfi_repeats: usize,
}

impl Default for PimpConfig {
    fn default() -> Self {
        PimpConfig { n_target_permutations: 30, pfi_repeats: 3 }
    }
}

/// Permutation test for PFI. The observed score comes from a model fitted
/// on `data`; each null score from a model refitted after permuting the
/// target. Scores are measured on `holdout` (true target) when given,
/// otherwise in-sample against the target the model was fitted on.
/// Raw p-value per feature: `(1 + #{null >= observed}) / (s + 1)` over the
/// `s` successful refits.
pub fn pimp(
    learner: &LearnerSpec,
    data: &Dataset,
    holdout: Option<&Dataset>,
    loss: Loss,
    config: PimpConfig,
    seed: RngSeed,
) -> Result<TestedImportance> {
    let s = config.n_target_permutations;
    if s < MIN_TARGET_PERMUTATIONS {
        return invalid(format!("PIMP needs at least {MIN_TARGET_PERMUTATIONS} target permutations, got {s}"));
    }
    if config.pfi_repeats == 0 {
        return invalid("pfi_repeats must be >= 1");
    }
    if let Some(h) = holdout {
        if h.p() != data.p() {
            return invalid("holdout data differ in feature count");
        }
    }
    learner.validate()?;
    let score = |fit_data: &Dataset, stream: u64| -> Result<Vec<f64>> {
        let model = fit(learner, fit_data, seed.derive2(stream, 0))?;
        let eval = holdout.unwrap_or(fit_data);
        Ok(pfi(&model, eval, loss, config.pfi_repeats, seed.derive2(stream, 1))?.scores)
    };
    let observed = score(data, 0)?;
    let nulls: Vec<Option<Vec<f64>>> = (1..=s as u64)
        .into_par_iter()
        .map(|k| {
            let mut y = data.target().to_vec();
            y.shuffle(&mut seed.derive2(k, 2).rng());
            let permuted = data.with_target(y.into())?;
            match score(&permuted, k) {
                Ok(v) => Ok(Some(v)),
                Err(Error::Fit(msg)) => {
                    log::warn!("PIMP refit {k} failed and is dropped: {msg}");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let nulls: Vec<Vec<f64>> = nulls.into_iter().flatten().collect();
    if (nulls.len() as f64) < MIN_PIMP_SUCCESS * s as f64 {
        return Err(Error::Fit(format!("only {} of {s} PIMP refits succeeded", nulls.len())));
    }
    let raw: Vec<f64> = (0..data.p())
        .map(|j| {
            let exceed = nulls.iter().filter(|n| n[j] >= observed[j]).count();
            (1 + exceed) as f64 / (nulls.len() + 1) as f64
        })
        .collect();
    TestedImportance::new(data.feature_names().to_vec(), Some(observed), raw, Correction::None, 0.05)
}
