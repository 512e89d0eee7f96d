//! Friedman's H-statistic (pairwise and one-versus-rest) and the
//! derivative-ICE heterogeneity screen.

use std::io::Write;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::Dataset;
use crate::effects::{derivative_ice, ice};
use crate::error::{invalid, Result};
use crate::grid::Grid;
use crate::model::Predictor;
use crate::seed::RngSeed;

/// Partial dependence functions are evaluated on at most this many rows.
pub const MAX_H_ROWS: usize = 300;

const DEGENERATE_DENOMINATOR: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionEntry {
    pub feature_a: String,
    /// `None` for the one-versus-rest statistic.
    pub feature_b: Option<String>,
    pub h_squared: f64,
    /// Sum of squares the statistic is normalized by.
    pub denominator: f64,
    /// Set when the denominator vanished and `h_squared` was reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionResult {
    pub entries: Vec<InteractionEntry>,
}

impl InteractionResult {
    /// `feature_a,feature_b,h_squared`; one-versus-rest entries go through
    /// [`write_total_csv`](Self::write_total_csv).
    pub fn write_pairwise_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature_a", "feature_b", "h_squared"])?;
        for e in &self.entries {
            if let Some(b) = &e.feature_b {
                w.write_record([e.feature_a.as_str(), b.as_str(), &e.h_squared.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `feature,h_squared`.
    pub fn write_total_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["feature", "h_squared"])?;
        for e in self.entries.iter().filter(|e| e.feature_b.is_none()) {
            w.write_record([e.feature_a.as_str(), &e.h_squared.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn evaluation_rows(data: &Dataset, max_rows: usize, seed: RngSeed) -> Result<Array2<f64>> {
    if max_rows < 2 {
        return invalid("H-statistic needs at least 2 evaluation rows");
    }
    if data.n() < 2 {
        return invalid("H-statistic needs at least 2 rows");
    }
    let m = data.n().min(max_rows).min(MAX_H_ROWS);
    if m == data.n() {
        Ok(data.features().to_owned())
    } else {
        Ok(data.subsample(m, seed)?.features().to_owned())
    }
}

/// Mean-centered partial dependence on `features` at every row of `x`,
/// averaging over the rows of `x` themselves.
fn centered_pd<P: Predictor + ?Sized>(pred: &P, x: &Array2<f64>, features: &[usize]) -> Vec<f64> {
    let mut pd: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let mut z = x.clone();
            for &j in features {
                z.column_mut(j).fill(x[[i, j]]);
            }
            pred.predict(z.view()).mean().expect("non-empty")
        })
        .collect();
    center(&mut pd);
    pd
}

fn center(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// H² = sum(num_i²) / sum(den_i²), clipped to [0, 1]; a vanishing
/// denominator yields 0 flagged as degenerate.
fn ratio(num: impl Iterator<Item = f64>, den: &[f64]) -> (f64, f64, bool) {
    let d: f64 = den.iter().map(|v| v * v).sum();
    if d <= DEGENERATE_DENOMINATOR {
        return (0.0, d, true);
    }
    let n: f64 = num.map(|v| v * v).sum();
    ((n / d).clamp(0.0, 1.0), d, false)
}

/// Pairwise H² of features `j` and `k`, with partial dependence evaluated
/// at up to `max_rows` (capped at [`MAX_H_ROWS`]) seeded sample rows.
pub fn h_pairwise<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    j: usize,
    k: usize,
    max_rows: usize,
    seed: RngSeed,
) -> Result<InteractionResult> {
    data.check_feature(j)?;
    data.check_feature(k)?;
    if j == k {
        return invalid("H-statistic needs two distinct features");
    }
    let (a, b) = (j.min(k), j.max(k));
    let x = evaluation_rows(data, max_rows, seed)?;
    let pd_ab = centered_pd(pred, &x, &[a, b]);
    let pd_a = centered_pd(pred, &x, &[a]);
    let pd_b = centered_pd(pred, &x, &[b]);
    let (h, denominator, degenerate) =
        ratio((0..x.nrows()).map(|i| pd_ab[i] - pd_a[i] - pd_b[i]), &pd_ab);
    let names = data.feature_names();
    Ok(InteractionResult {
        entries: vec![InteractionEntry {
            feature_a: names[j].clone(),
            feature_b: Some(names[k].clone()),
            h_squared: h,
            denominator,
            degenerate,
        }],
    })
}

/// H² of feature `j` against all other features.
pub fn h_total<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    j: usize,
    max_rows: usize,
    seed: RngSeed,
) -> Result<InteractionResult> {
    data.check_feature(j)?;
    if data.p() < 2 {
        return invalid("one-versus-rest H-statistic needs at least two features");
    }
    let x = evaluation_rows(data, max_rows, seed)?;
    let mut f = pred.predict(x.view()).to_vec();
    center(&mut f);
    let pd_j = centered_pd(pred, &x, &[j]);
    let rest: Vec<usize> = (0..data.p()).filter(|&c| c != j).collect();
    let pd_rest = centered_pd(pred, &x, &rest);
    let (h, denominator, degenerate) = ratio((0..x.nrows()).map(|i| f[i] - pd_j[i] - pd_rest[i]), &f);
    Ok(InteractionResult {
        entries: vec![InteractionEntry {
            feature_a: data.feature_names()[j].clone(),
            feature_b: None,
            h_squared: h,
            denominator,
            degenerate,
        }],
    })
}

/// Pairwise H² for every feature pair plus one-versus-rest H² per feature.
pub fn h_all<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    max_rows: usize,
    seed: RngSeed,
) -> Result<InteractionResult> {
    let p = data.p();
    let mut entries = Vec::new();
    for j in 0..p {
        for k in j + 1..p {
            entries.extend(h_pairwise(pred, data, j, k, max_rows, seed)?.entries);
        }
    }
    if p >= 2 {
        for j in 0..p {
            entries.extend(h_total(pred, data, j, max_rows, seed)?.entries);
        }
    }
    Ok(InteractionResult { entries })
}

/// Standard deviation of the derivative-ICE curves at each grid point.
/// Non-zero values mark regions where the feature interacts with others.
pub fn dice_screen<P: Predictor + ?Sized>(pred: &P, data: &Dataset, grid: &Grid) -> Result<Vec<f64>> {
    let curves = ice(pred, data, grid)?;
    Ok(derivative_ice(&curves)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpId;
    use crate::grid::{build_grid, GridStrategy};
    use crate::learners::OraclePredictor;
    use crate::model::fn_predictor;

    fn h2(pred: &impl Predictor, d: &Dataset, j: usize, k: usize) -> f64 {
        h_pairwise(pred, d, j, k, 300, RngSeed(1)).unwrap().entries[0].h_squared
    }

    /// Oracle: direct double loop over the sample, no shared helpers.
    fn brute_force_pairwise(f: &impl Predictor, x: &Array2<f64>, j: usize, k: usize) -> f64 {
        let m = x.nrows();
        let pd = |fix: &[usize], i: usize| {
            let mut s = 0.0;
            for r in 0..m {
                let mut z = x.row(r).to_owned();
                for &c in fix {
                    z[c] = x[[i, c]];
                }
                s += f.predict(z.insert_axis(ndarray::Axis(0)).view())[0];
            }
            s / m as f64
        };
        let mut jk: Vec<f64> = (0..m).map(|i| pd(&[j, k], i)).collect();
        let mut pj: Vec<f64> = (0..m).map(|i| pd(&[j], i)).collect();
        let mut pk: Vec<f64> = (0..m).map(|i| pd(&[k], i)).collect();
        for v in [&mut jk, &mut pj, &mut pk] {
            let mean = v.iter().sum::<f64>() / m as f64;
            v.iter_mut().for_each(|a| *a -= mean);
        }
        let num: f64 = (0..m).map(|i| (jk[i] - pj[i] - pk[i]).powi(2)).sum();
        num / jk.iter().map(|a| a * a).sum::<f64>()
    }

    #[test]
    fn additive_model_has_no_interaction() {
        let d = DgpId::Fig6Flat.sample(120, RngSeed(0)).unwrap();
        let f = fn_predictor(|r| r[0].sin() + r[1] * r[1] + 3.0 * r[2]);
        assert!(h2(&f, &d, 0, 1) < 1e-8);
        assert!(h_total(&f, &d, 1, 300, RngSeed(0)).unwrap().entries[0].h_squared < 1e-8);
    }

    #[test]
    fn product_of_centered_features_is_pure_interaction() {
        let d = DgpId::Fig5Masked.sample(150, RngSeed(2)).unwrap();
        let f = fn_predictor(|r| r[0] * r[1]);
        let h = h2(&f, &d, 0, 1);
        let x = d.features().to_owned();
        let oracle = brute_force_pairwise(&f, &x, 0, 1);
        assert!((h - oracle).abs() < 1e-10);
        assert!(h > 0.9, "{h}");
    }

    #[test]
    fn symmetric_and_shift_invariant() {
        let d = DgpId::Fig5Masked.sample(100, RngSeed(3)).unwrap();
        let f = OraclePredictor::from(DgpId::Fig5Masked);
        let shifted = fn_predictor(|r| DgpId::Fig5Masked.mean(r) + 1000.0);
        let a = h2(&f, &d, 1, 2);
        assert!((a - h2(&f, &d, 2, 1)).abs() < 1e-12);
        assert!((a - h2(&shifted, &d, 1, 2)).abs() < 1e-8);
    }

    #[test]
    fn masked_interaction_oracle_pattern() {
        let d = DgpId::Fig5Masked.sample(300, RngSeed(4)).unwrap();
        let f = OraclePredictor::from(DgpId::Fig5Masked);
        assert!(h2(&f, &d, 0, 1) <= 0.01);
        assert!(h2(&f, &d, 0, 2) <= 0.01);
        assert!(h2(&f, &d, 1, 2) > 0.3);
        let tot = |j| h_total(&f, &d, j, 300, RngSeed(0)).unwrap().entries[0].h_squared;
        assert!(tot(0) < 0.01);
        assert!(tot(1) > 0.05 && tot(2) > 0.05);
    }

    #[test]
    fn constant_model_is_flagged_degenerate() {
        let d = DgpId::Fig5Masked.sample(50, RngSeed(5)).unwrap();
        let f = fn_predictor(|_| 2.0);
        let e = &h_pairwise(&f, &d, 0, 1, 300, RngSeed(0)).unwrap().entries[0];
        assert!(e.degenerate && e.h_squared == 0.0);
    }

    #[test]
    fn single_feature_model_has_zero_total() {
        let d = DgpId::Fig5Masked.sample(60, RngSeed(6)).unwrap();
        let f = fn_predictor(|r| r[1].powi(3));
        let e = &h_total(&f, &d, 1, 300, RngSeed(0)).unwrap().entries[0];
        assert!(e.h_squared < 1e-12);
    }

    #[test]
    fn rejects_same_feature_twice() {
        let d = DgpId::Fig5Masked.sample(20, RngSeed(0)).unwrap();
        let f = fn_predictor(|r| r[0]);
        assert!(h_pairwise(&f, &d, 1, 1, 300, RngSeed(0)).is_err());
    }

    #[test]
    fn dice_screen_separates_interacting_feature() {
        let d = DgpId::Fig5Masked.sample(200, RngSeed(7)).unwrap();
        let f = OraclePredictor::from(DgpId::Fig5Masked);
        let linear = fn_predictor(|r| 3.0 * r[0] - r[1]);
        let g1 = build_grid(&d, 0, GridStrategy::Quantile, 20, RngSeed(0)).unwrap();
        let g2 = build_grid(&d, 1, GridStrategy::Quantile, 20, RngSeed(0)).unwrap();
        let s1 = dice_screen(&f, &d, &g1).unwrap();
        let s2 = dice_screen(&f, &d, &g2).unwrap();
        let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
        assert!(max(&s2) > 5.0 * max(&s1).max(1e-12));
        assert!(dice_screen(&linear, &d, &g2).unwrap().iter().all(|&s| s <= 1e-8));
    }

    #[test]
    fn all_pairs_csv_shapes() {
        let d = DgpId::Fig5Masked.sample(40, RngSeed(8)).unwrap();
        let f = OraclePredictor::from(DgpId::Fig5Masked);
        let r = h_all(&f, &d, 40, RngSeed(0)).unwrap();
        assert_eq!(r.entries.len(), 3 + 3);
        let mut buf = Vec::new();
        r.write_pairwise_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        let mut buf = Vec::new();
        r.write_total_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("feature,h_squared\n"));
    }
}
