//! SAGE: Shapley values of the loss-reduction value function
//! `nu(S) = E[loss | nothing known] - E[loss | features in S known]`.
//!
//! Unknown features are imputed by drawing whole donor rows, either from the
//! full data (marginal) or from the donor's leaf of a tree that partitions
//! the data by the known features (conditional). Predictions are averaged
//! over the imputations before the loss is taken.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::conditional::{fit_subset_sampler, ConditionalSampler, DEFAULT_MAX_LEAVES};
use super::{ImportanceResult, ImportanceUnit};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::model::{Loss, Predictor};
use crate::seed::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SageMode {
    Marginal,
    Conditional,
}

impl SageMode {
    pub fn name(self) -> &'static str {
        match self {
            SageMode::Marginal => "marginal",
            SageMode::Conditional => "conditional",
        }
    }

    pub fn parse(s: &str) -> Option<SageMode> {
        match s {
            "marginal" => Some(SageMode::Marginal),
            "conditional" => Some(SageMode::Conditional),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SageConfig {
    pub n_orderings: usize,
    /// Rows evaluated per ordering.
    pub batch_size: usize,
    /// Donor draws averaged per row.
    pub n_imputations: usize,
    /// Leaf budget of the conditional samplers.
    pub max_leaves: usize,
}

impl Default for SageConfig {
    fn default() -> Self {
        SageConfig { n_orderings: 200, batch_size: 32, n_imputations: 8, max_leaves: DEFAULT_MAX_LEAVES }
    }
}

pub fn sage<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    mode: SageMode,
    n_orderings: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    sage_with(pred, data, loss, mode, SageConfig { n_orderings, ..SageConfig::default() }, seed)
}

type SamplerCache = Mutex<HashMap<Vec<usize>, Arc<ConditionalSampler>>>;

struct Imputer<'a> {
    data: &'a Dataset,
    mode: SageMode,
    max_leaves: usize,
    seed: RngSeed,
    cache: SamplerCache,
}

impl Imputer<'_> {
    /// Sampler for the complement of `known` (sorted), fitted once per set.
    /// Its seed depends only on the set, so results do not depend on which
    /// thread fits it first.
    fn sampler(&self, known: &[usize]) -> Result<Arc<ConditionalSampler>> {
        let mut cache = self.cache.lock().expect("sampler cache poisoned");
        if let Some(s) = cache.get(known) {
            return Ok(s.clone());
        }
        let unknown: Vec<usize> = (0..self.data.p()).filter(|j| !known.contains(j)).collect();
        let seed = known.iter().fold(self.seed.derive(u64::MAX), |s, &j| s.derive(j as u64));
        let s = Arc::new(fit_subset_sampler(self.data, &unknown, known, self.max_leaves, seed)?);
        cache.insert(known.to_vec(), s.clone());
        Ok(s)
    }

    /// Mean loss over the batch when only `known` features keep their values.
    fn loss<P: Predictor + ?Sized>(
        &self,
        pred: &P,
        loss: Loss,
        rows: &[usize],
        uniforms: &Array2<f64>,
        known: &[bool],
    ) -> Result<f64> {
        let x = self.data.features();
        let y = self.data.target();
        let p = self.data.p();
        let k = uniforms.ncols();
        if known.iter().all(|&b| b) {
            let pr = pred.predict(x.select(ndarray::Axis(0), rows).view());
            let total: f64 = rows.iter().zip(pr.iter()).map(|(&i, &v)| loss.pointwise(y[i], v)).sum();
            return Ok(total / rows.len() as f64);
        }
        let known_idx: Vec<usize> = (0..p).filter(|&j| known[j]).collect();
        let sampler = match self.mode {
            SageMode::Conditional if !known_idx.is_empty() => Some(self.sampler(&known_idx)?),
            _ => None,
        };
        let n = self.data.n();
        let mut xi = Array2::<f64>::zeros((rows.len() * k, p));
        for (b, &i) in rows.iter().enumerate() {
            let pool: Option<&[usize]> =
                sampler.as_ref().map(|s| s.leaf_members()[s.fitted_leaves()[i]].as_slice());
            for m in 0..k {
                let u = uniforms[[b, m]];
                let donor = match pool {
                    None => ((u * n as f64) as usize).min(n - 1),
                    Some(pool) => pool[((u * pool.len() as f64) as usize).min(pool.len() - 1)],
                };
                let mut out = xi.row_mut(b * k + m);
                for j in 0..p {
                    out[j] = if known[j] { x[[i, j]] } else { x[[donor, j]] };
                }
            }
        }
        let pr = pred.predict(xi.view());
        let total: f64 = rows
            .iter()
            .enumerate()
            .map(|(b, &i)| {
                let avg = pr.slice(ndarray::s![b * k..(b + 1) * k]).sum() / k as f64;
                loss.pointwise(y[i], avg)
            })
            .sum();
        Ok(total / rows.len() as f64)
    }
}

/// Ordering-sampling SAGE estimator. Replicates are the per-ordering
/// contributions; within an ordering the same donor draws are reused for
/// every prefix, so each ordering's contributions sum exactly to the
/// batch's `nu(full set)`.
pub fn sage_with<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    mode: SageMode,
    config: SageConfig,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    if config.n_orderings == 0 || config.batch_size == 0 || config.n_imputations == 0 {
        return invalid("SAGE needs n_orderings, batch_size and n_imputations >= 1");
    }
    if config.max_leaves == 0 {
        return invalid("max_leaves must be >= 1");
    }
    if data.n() < 2 {
        return invalid("SAGE needs at least 2 rows");
    }
    let p = data.p();
    let imputer =
        Imputer { data, mode, max_leaves: config.max_leaves, seed, cache: Mutex::new(HashMap::new()) };
    let batch = config.batch_size.min(data.n());
    let per_ordering: Vec<Vec<f64>> = (0..config.n_orderings)
        .into_par_iter()
        .map(|o| {
            let mut rng = seed.derive(o as u64).rng();
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut rng);
            let rows = index::sample(&mut rng, data.n(), batch).into_vec();
            let uniforms = Array2::from_shape_simple_fn((batch, config.n_imputations), || rng.random::<f64>());
            let mut known = vec![false; p];
            let mut prev = imputer.loss(pred, loss, &rows, &uniforms, &known)?;
            let mut contrib = vec![0.0; p];
            for &j in &order {
                known[j] = true;
                let cur = imputer.loss(pred, loss, &rows, &uniforms, &known)?;
                contrib[j] = prev - cur;
                prev = cur;
            }
            Ok(contrib)
        })
        .collect::<Result<_>>()?;
    let replicates: Vec<Vec<f64>> =
        (0..p).map(|j| per_ordering.iter().map(|c| c[j]).collect()).collect();
    Ok(ImportanceResult::from_replicates(ImportanceUnit::Feature, data.feature_names().to_vec(), replicates))
}
