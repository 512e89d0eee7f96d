//! Shapley values under the marginal (interventional) value function
//! `v(S) = mean over background rows of f(x_S, z_rest)`.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{ImportanceResult, ImportanceUnit};
use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::model::Predictor;
use crate::seed::RngSeed;
use crate::stats;

pub const MAX_EXACT_FEATURES: usize = 15;
pub const DEFAULT_BACKGROUND_SIZE: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyExplanation {
    pub instance_index: Option<usize>,
    pub phi: Vec<f64>,
    /// Mean prediction over the background rows.
    pub base_value: f64,
    pub prediction: f64,
    /// Zero for exact enumeration.
    pub n_orderings: usize,
    /// Per-ordering contributions (`n_orderings x p`), sampled estimator only.
    pub ordering_contributions: Option<Array2<f64>>,
}

impl ShapleyExplanation {
    /// `base + sum(phi) - prediction`.
    pub fn efficiency_residual(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>() - self.prediction
    }

    /// Standard error of each `phi_j`; zero for exact values.
    pub fn std_errors(&self) -> Vec<f64> {
        match &self.ordering_contributions {
            None => vec![0.0; self.phi.len()],
            Some(c) => {
                let m = c.nrows() as f64;
                c.columns().into_iter().map(|col| stats::std_dev(&col.to_vec()) / m.sqrt()).collect()
            }
        }
    }
}

/// Seeded subsample of at most [`DEFAULT_BACKGROUND_SIZE`] rows.
pub fn default_background(train: &Dataset, seed: RngSeed) -> Dataset {
    let size = train.n().min(DEFAULT_BACKGROUND_SIZE);
    train.subsample(size, seed).expect("size within 1..=n")
}

fn check_instance(background: &Dataset, instance: ArrayView1<'_, f64>) -> Result<()> {
    if instance.len() != background.p() {
        return invalid(format!(
            "instance has {} values, background has {} features",
            instance.len(),
            background.p()
        ));
    }
    Ok(())
}

fn mean_prediction<P: Predictor + ?Sized>(pred: &P, x: &Array2<f64>) -> f64 {
    pred.predict(x.view()).sum() / x.nrows() as f64
}

/// Exact Shapley values by enumerating all `2^p` coalitions.
pub fn shapley_exact<P: Predictor + ?Sized>(
    pred: &P,
    background: &Dataset,
    instance: ArrayView1<'_, f64>,
) -> Result<ShapleyExplanation> {
    check_instance(background, instance)?;
    let p = background.p();
    if p > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures { p, max: MAX_EXACT_FEATURES });
    }
    let bg = background.features();
    let values: Vec<f64> = (0..1usize << p)
        .into_par_iter()
        .map(|mask| {
            let mut x = bg.to_owned();
            for j in 0..p {
                if mask & (1 << j) != 0 {
                    x.column_mut(j).fill(instance[j]);
                }
            }
            mean_prediction(pred, &x)
        })
        .collect();

    // w(s) = s! (p - s - 1)! / p!
    let mut weight = vec![0.0; p];
    for (s, w) in weight.iter_mut().enumerate() {
        let mut v = 1.0 / p as f64;
        for k in 1..=s {
            v *= k as f64 / (p - k) as f64;
        }
        *w = v;
    }
    let mut phi = vec![0.0; p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        let mut acc = 0.0;
        for mask in 0..1usize << p {
            if mask & bit == 0 {
                let s = mask.count_ones() as usize;
                acc += weight[s] * (values[mask | bit] - values[mask]);
            }
        }
        *phi_j = acc;
    }
    let prediction = pred.predict(instance.insert_axis(ndarray::Axis(0)))[0];
    Ok(ShapleyExplanation {
        instance_index: None,
        phi,
        base_value: values[0],
        prediction,
        n_orderings: 0,
        ordering_contributions: None,
    })
}

/// Ordering-sampling estimator: for each of `n_orderings` random feature
/// orderings, features are switched from background to instance values one
/// at a time and the change of the background-mean prediction is credited
/// to the switched feature. Unbiased; its variance shrinks as 1/m.
pub fn shapley_sampled<P: Predictor + ?Sized>(
    pred: &P,
    background: &Dataset,
    instance: ArrayView1<'_, f64>,
    n_orderings: usize,
    seed: RngSeed,
) -> Result<ShapleyExplanation> {
    check_instance(background, instance)?;
    if n_orderings == 0 {
        return invalid("n_orderings must be >= 1");
    }
    let p = background.p();
    let bg = background.features().to_owned();
    let base_value = mean_prediction(pred, &bg);
    let rows: Vec<Vec<f64>> = (0..n_orderings)
        .into_par_iter()
        .map(|k| {
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut seed.derive(k as u64).rng());
            let mut x = bg.clone();
            let mut prev = base_value;
            let mut contrib = vec![0.0; p];
            for &j in &order {
                x.column_mut(j).fill(instance[j]);
                let v = mean_prediction(pred, &x);
                contrib[j] = v - prev;
                prev = v;
            }
            contrib
        })
        .collect();
    let mut contributions = Array2::<f64>::zeros((n_orderings, p));
    for (k, r) in rows.iter().enumerate() {
        for j in 0..p {
            contributions[[k, j]] = r[j];
        }
    }
    let phi = contributions.columns().into_iter().map(|c| c.sum() / n_orderings as f64).collect();
    let prediction = pred.predict(instance.insert_axis(ndarray::Axis(0)))[0];
    Ok(ShapleyExplanation {
        instance_index: None,
        phi,
        base_value,
        prediction,
        n_orderings,
        ordering_contributions: Some(contributions),
    })
}

/// Mean absolute sampled Shapley value per feature over the rows of
/// `eval_data`; replicates are the per-row absolute values.
pub fn shap_importance<P: Predictor + ?Sized>(
    pred: &P,
    background: &Dataset,
    eval_data: &Dataset,
    n_orderings: usize,
    seed: RngSeed,
) -> Result<ImportanceResult> {
    if eval_data.p() != background.p() {
        return invalid("evaluation data and background differ in feature count");
    }
    let explanations: Vec<Vec<f64>> = (0..eval_data.n())
        .into_par_iter()
        .map(|i| {
            shapley_sampled(pred, background, eval_data.features().row(i), n_orderings, seed.derive(i as u64))
                .map(|e| e.phi)
        })
        .collect::<Result<_>>()?;
    let p = eval_data.p();
    let replicates: Vec<Vec<f64>> =
        (0..p).map(|j| explanations.iter().map(|phi| phi[j].abs()).collect()).collect();
    Ok(ImportanceResult::from_replicates(
        ImportanceUnit::Feature,
        eval_data.feature_names().to_vec(),
        replicates,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpId;
    use crate::model::fn_predictor;
    use ndarray::arr1;

    /// Independent oracle: the Shapley formula written directly over
    /// subsets with factorials, evaluating v(S) from scratch.
    fn brute_force<P: Predictor>(f: &P, bg: &Dataset, x: &[f64]) -> Vec<f64> {
        let p = x.len();
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        let v = |mask: usize| {
            let mut total = 0.0;
            for row in bg.features().outer_iter() {
                let z: Vec<f64> = (0..p).map(|j| if mask >> j & 1 == 1 { x[j] } else { row[j] }).collect();
                total += f.predict(arr1(&z).insert_axis(ndarray::Axis(0)).view())[0];
            }
            total / bg.n() as f64
        };
        (0..p)
            .map(|j| {
                (0..1usize << p)
                    .filter(|m| m >> j & 1 == 0)
                    .map(|m| {
                        let s = m.count_ones() as usize;
                        fact(s) * fact(p - s - 1) / fact(p) * (v(m | 1 << j) - v(m))
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn exact_matches_brute_force_and_linear_closed_form() {
        let bg = DgpId::Fig5Masked.sample(40, RngSeed(1)).unwrap();
        let x = [0.3, -0.7, 0.2];
        let beta = [1.5, -2.0, 0.5];
        let lin = fn_predictor(move |r| beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2]);
        let e = shapley_exact(&lin, &bg, arr1(&x).view()).unwrap();
        for j in 0..3 {
            let mean = bg.column(j).sum() / bg.n() as f64;
            assert!((e.phi[j] - beta[j] * (x[j] - mean)).abs() < 1e-12);
        }
        let nonlinear = DgpId::Fig5Masked;
        let f = crate::learners::OraclePredictor::from(nonlinear);
        let e = shapley_exact(&f, &bg, arr1(&x).view()).unwrap();
        let bf = brute_force(&f, &bg, &x);
        for j in 0..3 {
            assert!((e.phi[j] - bf[j]).abs() < 1e-12);
        }
        assert!(e.efficiency_residual().abs() < 1e-10);
    }

    #[test]
    fn axioms_on_constructed_cases() {
        let bg = DgpId::Fig6Flat.sample(30, RngSeed(2)).unwrap();
        let c = fn_predictor(|_| 1.0);
        let x = bg.features().row(3).to_owned();
        let e = shapley_exact(&c, &bg, x.view()).unwrap();
        assert!(e.phi.iter().all(|&v| v == 0.0));

        // duplicated column: symmetric features get equal credit, unread ones none
        let mut xm = bg.features().to_owned();
        let c0 = xm.column(0).to_owned();
        xm.column_mut(1).assign(&c0);
        let dup = Dataset::from_arrays(xm, bg.target().to_owned()).unwrap();
        let f = fn_predictor(|r| r[0] + r[1]);
        let mut inst = dup.features().row(0).to_owned();
        inst[1] = inst[0];
        let e = shapley_exact(&f, &dup, inst.view()).unwrap();
        assert!((e.phi[0] - e.phi[1]).abs() < 1e-12);
        assert!(e.phi[2..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_many_features_points_to_sampling() {
        let bg = DgpId::Fig2Noise.sample(5, RngSeed(0)).unwrap();
        let f = fn_predictor(|r| r[0]);
        let err = shapley_exact(&f, &bg, bg.features().row(0)).unwrap_err();
        assert!(err.to_string().contains("sampled"));
    }

    #[test]
    fn one_ordering_is_exact_for_single_feature() {
        let x = ndarray::Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
        let bg = Dataset::from_arrays(x, ndarray::Array1::zeros(10)).unwrap();
        let f = fn_predictor(|r| r[0] * r[0]);
        let inst = arr1(&[2.5]);
        let s = shapley_sampled(&f, &bg, inst.view(), 1, RngSeed(1)).unwrap();
        let e = shapley_exact(&f, &bg, inst.view()).unwrap();
        assert!((s.phi[0] - e.phi[0]).abs() < 1e-12);
    }

    #[test]
    fn sampled_efficiency_holds_per_ordering() {
        let bg = DgpId::Fig5Masked.sample(30, RngSeed(4)).unwrap();
        let f = crate::learners::OraclePredictor::from(DgpId::Fig5Masked);
        let s = shapley_sampled(&f, &bg, arr1(&[0.1, 0.5, -0.4]).view(), 17, RngSeed(3)).unwrap();
        assert!(s.efficiency_residual().abs() < 1e-10);
        assert_eq!(s.std_errors().len(), 3);
    }

    #[test]
    fn constant_model_has_zero_shap_importance() {
        let d = DgpId::Fig6Flat.sample(20, RngSeed(4)).unwrap();
        let c = fn_predictor(|_| 3.0);
        let imp = shap_importance(&c, &d, &d.select_rows(&[0, 1, 2]), 4, RngSeed(0)).unwrap();
        assert!(imp.scores.iter().all(|&v| v == 0.0));
    }
}
