use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::conditional::ConditionalSampler;
use super::{ImportanceResult, ImportanceUnit};
use crate::data::Dataset;
use crate::error::{invalid, Result};
use crate::model::{Loss, Predictor};
use crate::seed::{Rng, RngSeed};

/// A named set of feature columns perturbed together.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGroup {
    pub name: String,
    pub features: Vec<usize>,
}

impl FeatureGroup {
    pub fn new(name: impl Into<String>, features: Vec<usize>) -> Self {
        FeatureGroup { name: name.into(), features }
    }
}

/// `perm[i]` is the row whose values row `i` receives.
pub(crate) fn random_permutation(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

/// Permutation that only exchanges rows sharing a leaf. Leaves are visited
/// in id order and their members in row order, so a single leaf yields the
/// same permutation as [`random_permutation`] with the same generator.
pub(crate) fn within_leaf_permutation(leaves: &[usize], n_leaves: usize, rng: &mut Rng) -> Vec<usize> {
    let mut members = vec![Vec::new(); n_leaves];
    for (row, &leaf) in leaves.iter().enumerate() {
        members[leaf].push(row);
    }
    let mut perm = vec![0; leaves.len()];
    for rows in members {
        let mut shuffled = rows.clone();
        shuffled.shuffle(rng);
        for (dst, src) in rows.into_iter().zip(shuffled) {
            perm[dst] = src;
        }
    }
    perm
}

fn permuted_loss<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    columns: &[usize],
    perm: &[usize],
) -> f64 {
    let x = data.features();
    let mut xp: Array2<f64> = x.to_owned();
    for &j in columns {
        for (i, &src) in perm.iter().enumerate() {
            xp[[i, j]] = x[[src, j]];
        }
    }
    loss.eval(data.target(), pred.predict(xp.view()).view())
}

fn check_common(data: &Dataset, repeats: usize) -> Result<()> {
    if data.n() < 2 {
        return invalid("permutation importance needs at least two rows");
    }
    if repeats == 0 {
        return invalid("repeats must be >= 1");
    }
    Ok(())
}

/// Runs `repeats` loss-increase replicates for each unit. Unit `u`, repeat
/// `r` draws its permutation from `seed.derive2(stream(u), r)`.
fn replicate_units<P, F>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    units: &[Vec<usize>],
    streams: &[u64],
    repeats: usize,
    seed: RngSeed,
    make_perm: F,
) -> Vec<Vec<f64>>
where
    P: Predictor + ?Sized,
    F: Fn(usize, &mut Rng) -> Vec<usize> + Sync,
{
    let baseline = crate::model::evaluate(pred, data, loss);
    let jobs: Vec<(usize, usize)> = (0..units.len()).flat_map(|u| (0..repeats).map(move |r| (u, r))).collect();
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(u, r)| {
            let mut rng = seed.derive2(streams[u], r as u64).rng();
            let perm = make_perm(u, &mut rng);
            permuted_loss(pred, data, loss, &units[u], &perm) - baseline
        })
        .collect();
    values.chunks(repeats).map(<[f64]>::to_vec).collect()
}

/// Marginal permutation feature importance: mean over `repeats` of the
/// loss increase after permuting one column (difference, not ratio).
pub fn pfi<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    repeats: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    check_common(data, repeats)?;
    let units: Vec<Vec<usize>> = (0..data.p()).map(|j| vec![j]).collect();
    let streams: Vec<u64> = (0..data.p() as u64).collect();
    let n = data.n();
    let reps = replicate_units(pred, data, loss, &units, &streams, repeats, seed, |_, rng| {
        random_permutation(n, rng)
    });
    Ok(ImportanceResult::from_replicates(ImportanceUnit::Feature, data.feature_names().to_vec(), reps))
}

/// Conditional permutation importance: each sampler's feature is permuted
/// only within the sampler's leaves.
pub fn cfi<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    samplers: &[ConditionalSampler],
    repeats: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    check_common(data, repeats)?;
    if samplers.is_empty() {
        return invalid("conditional importance needs at least one sampler");
    }
    let mut units = Vec::new();
    let mut streams = Vec::new();
    let mut leaves = Vec::new();
    for s in samplers {
        if s.targets().len() != 1 {
            return invalid("conditional importance needs single-feature samplers");
        }
        let j = s.targets()[0];
        data.check_feature(j)?;
        units.push(vec![j]);
        streams.push(j as u64);
        leaves.push(s.leaf_assignments(data));
    }
    let reps = replicate_units(pred, data, loss, &units, &streams, repeats, seed, |u, rng| {
        within_leaf_permutation(&leaves[u], samplers[u].n_leaves(), rng)
    });
    let names = units.iter().map(|u| data.feature_names()[u[0]].clone()).collect();
    Ok(ImportanceResult::from_replicates(ImportanceUnit::Feature, names, reps))
}

/// Importance of feature groups: all columns of a group share one row
/// permutation, which keeps within-group association intact. Group `g`
/// uses the same random stream as feature `g` in [`pfi`].
pub fn grouped_pfi<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    loss: Loss,
    groups: &[FeatureGroup],
    repeats: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    check_common(data, repeats)?;
    if groups.is_empty() {
        return invalid("no feature groups given");
    }
    let mut seen = vec![false; data.p()];
    for g in groups {
        if g.features.is_empty() {
            return invalid(format!("group '{}' is empty", g.name));
        }
        for &j in &g.features {
            data.check_feature(j)?;
            if seen[j] {
                return invalid(format!("feature {j} appears in more than one group"));
            }
            seen[j] = true;
        }
    }
    let units: Vec<Vec<usize>> = groups.iter().map(|g| g.features.clone()).collect();
    let streams: Vec<u64> = (0..groups.len() as u64).collect();
    let n = data.n();
    let reps = replicate_units(pred, data, loss, &units, &streams, repeats, seed, |_, rng| {
        random_permutation(n, rng)
    });
    let names = groups.iter().map(|g| g.name.clone()).collect();
    Ok(ImportanceResult::from_replicates(ImportanceUnit::Group, names, reps))
}
