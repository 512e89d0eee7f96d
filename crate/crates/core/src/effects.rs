//! Feature effect estimators: PDP, ICE (raw, centered, derivative),
//! two-dimensional PDP, first-order ALE and the M-plot.

use std::io::Write;

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridStrategy};
use crate::model::Predictor;
use crate::stats;

pub const DEFAULT_ALE_INTERVALS: usize = 20;
pub const DEFAULT_NEIGHBORHOOD_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectKind {
    Pdp,
    Ice,
    CenteredIce,
    DerivativeIce,
    Ale,
    Mplot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectCurve {
    pub grid: Grid,
    /// Aggregate effect per grid point.
    pub values: Vec<f64>,
    /// n x |grid| per-observation curves (ICE variants only).
    pub per_observation: Option<Array2<f64>>,
    pub kind: EffectKind,
    pub centered: bool,
    /// Observations per interval (ALE only; one fewer than grid points).
    pub interval_counts: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Effect2D {
    pub grid_a: Grid,
    pub grid_b: Grid,
    /// |grid_a| x |grid_b|.
    pub values: Array2<f64>,
}

/// Predictions on `data` with column `j` overwritten by `value`.
pub(crate) fn predict_with_value<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    j: usize,
    value: f64,
) -> Vec<f64> {
    let mut x = data.features().to_owned();
    x.column_mut(j).fill(value);
    pred.predict(x.view()).to_vec()
}

fn check_grid(data: &Dataset, grid: &Grid) -> Result<()> {
    data.check_feature(grid.feature_index)?;
    if grid.len() < 2 {
        return invalid("grid needs at least two points");
    }
    Ok(())
}

/// Individual conditional expectation curves; `values` holds their mean (the PDP).
pub fn ice<P: Predictor + ?Sized>(pred: &P, data: &Dataset, grid: &Grid) -> Result<EffectCurve> {
    check_grid(data, grid)?;
    let n = data.n();
    let j = grid.feature_index;
    let columns: Vec<Vec<f64>> = grid
        .values
        .par_iter()
        .map(|&g| predict_with_value(pred, data, j, g))
        .collect();
    let mut per_obs = Array2::<f64>::zeros((n, grid.len()));
    for (g, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            per_obs[[i, g]] = *v;
        }
    }
    let values = column_means(&per_obs);
    Ok(EffectCurve {
        grid: grid.clone(),
        values,
        per_observation: Some(per_obs),
        kind: EffectKind::Ice,
        centered: false,
        interval_counts: None,
    })
}

fn column_means(m: &Array2<f64>) -> Vec<f64> {
    let n = m.nrows() as f64;
    m.columns().into_iter().map(|c| c.sum() / n).collect()
}

/// Partial dependence: the pointwise mean of the ICE curves over `data`.
pub fn pdp<P: Predictor + ?Sized>(pred: &P, data: &Dataset, grid: &Grid) -> Result<EffectCurve> {
    let mut curve = ice(pred, data, grid)?;
    curve.per_observation = None;
    curve.kind = EffectKind::Pdp;
    Ok(curve)
}

fn require_ice(curve: &EffectCurve) -> Result<&Array2<f64>> {
    match (&curve.kind, &curve.per_observation) {
        (EffectKind::Ice | EffectKind::CenteredIce, Some(m)) => Ok(m),
        _ => invalid("operation needs ICE curves"),
    }
}

/// Shifts each ICE row so that it is zero at grid position `anchor`.
pub fn centered_ice(curve: &EffectCurve, anchor: usize) -> Result<EffectCurve> {
    let m = require_ice(curve)?;
    if anchor >= curve.grid.len() {
        return invalid(format!("anchor {anchor} outside grid of length {}", curve.grid.len()));
    }
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let a = row[anchor];
        row.mapv_inplace(|v| v - a);
    }
    Ok(EffectCurve {
        grid: curve.grid.clone(),
        values: column_means(&out),
        per_observation: Some(out),
        kind: EffectKind::CenteredIce,
        centered: true,
        interval_counts: None,
    })
}

fn finite_difference(grid: &[f64], row: ArrayView1<'_, f64>, g: usize) -> f64 {
    let last = grid.len() - 1;
    let (lo, hi) = match g {
        0 => (0, 1),
        g if g == last => (last - 1, last),
        g => (g - 1, g + 1),
    };
    (row[hi] - row[lo]) / (grid[hi] - grid[lo])
}

/// Central finite differences of each ICE curve (one-sided at the ends),
/// plus the across-observation standard deviation at every grid point.
pub fn derivative_ice(curve: &EffectCurve) -> Result<(EffectCurve, Vec<f64>)> {
    let m = require_ice(curve)?;
    let grid = &curve.grid.values;
    if grid.len() < 2 {
        return invalid("derivative ICE needs at least two grid points");
    }
    let mut d = Array2::<f64>::zeros(m.dim());
    for (i, row) in m.rows().into_iter().enumerate() {
        for g in 0..grid.len() {
            d[[i, g]] = finite_difference(grid, row, g);
        }
    }
    let sd: Vec<f64> = d.columns().into_iter().map(|c| stats::std_dev(&c.to_vec())).collect();
    let out = EffectCurve {
        grid: curve.grid.clone(),
        values: column_means(&d),
        per_observation: Some(d),
        kind: EffectKind::DerivativeIce,
        centered: false,
        interval_counts: None,
    };
    Ok((out, sd))
}

/// Mean prediction with both grid features fixed, for every grid pair.
pub fn pdp_2d<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    grid_a: &Grid,
    grid_b: &Grid,
) -> Result<Effect2D> {
    check_grid(data, grid_a)?;
    check_grid(data, grid_b)?;
    let (ja, jb) = (grid_a.feature_index, grid_b.feature_index);
    if ja == jb {
        return invalid("two-dimensional PDP needs two distinct features");
    }
    let nb = grid_b.len();
    let cells: Vec<f64> = (0..grid_a.len() * nb)
        .into_par_iter()
        .map(|cell| {
            let mut x = data.features().to_owned();
            x.column_mut(ja).fill(grid_a.values[cell / nb]);
            x.column_mut(jb).fill(grid_b.values[cell % nb]);
            pred.predict(x.view()).mean().unwrap_or(0.0)
        })
        .collect();
    let values = Array2::from_shape_vec((grid_a.len(), nb), cells)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(Effect2D { grid_a: grid_a.clone(), grid_b: grid_b.clone(), values })
}

/// First-order accumulated local effects.
///
/// Interval edges are empirical quantiles of the feature; an interval
/// without observations is merged into its left neighbour. Each
/// observation contributes the prediction difference between the upper
/// and lower edge of its interval. The accumulated curve is centered so
/// that its data-weighted mean (interval midpoint values weighted by
/// interval counts) is zero.
pub fn ale<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    feature_index: usize,
    n_intervals: usize,
) -> Result<EffectCurve> {
    data.check_feature(feature_index)?;
    if n_intervals == 0 {
        return invalid("ALE needs at least one interval");
    }
    let col = data.column(feature_index).to_vec();
    let sorted = stats::sorted(&col);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(Error::DegenerateFeature(feature_index));
    }
    let mut edges: Vec<f64> = (0..=n_intervals)
        .map(|k| stats::quantile_sorted(&sorted, k as f64 / n_intervals as f64))
        .collect();
    edges.dedup();

    let assign = |edges: &[f64], x: f64| edges.partition_point(|&e| e < x).max(1);
    loop {
        let mut counts = vec![0usize; edges.len()];
        for &x in &col {
            counts[assign(&edges, x)] += 1;
        }
        match (1..edges.len()).find(|&k| counts[k] == 0) {
            Some(k) => {
                edges.remove(k - 1);
            }
            None => break,
        }
    }
    let k_int = edges.len() - 1;
    let members: Vec<Vec<usize>> = {
        let mut m = vec![Vec::new(); k_int];
        for (i, &x) in col.iter().enumerate() {
            m[assign(&edges, x) - 1].push(i);
        }
        m
    };

    let effects: Vec<f64> = members
        .par_iter()
        .enumerate()
        .map(|(k, rows)| {
            let sub = data.select_rows(rows);
            let upper = predict_with_value(pred, &sub, feature_index, edges[k + 1]);
            let lower = predict_with_value(pred, &sub, feature_index, edges[k]);
            upper.iter().zip(&lower).map(|(u, l)| u - l).sum::<f64>() / rows.len() as f64
        })
        .collect();

    let mut acc = Vec::with_capacity(edges.len());
    acc.push(0.0);
    for e in &effects {
        acc.push(acc[acc.len() - 1] + e);
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let offset = ale_weighted_mean(&acc, &counts);
    acc.iter_mut().for_each(|v| *v -= offset);

    Ok(EffectCurve {
        grid: Grid { feature_index, values: edges, strategy: GridStrategy::Quantile },
        values: acc,
        per_observation: None,
        kind: EffectKind::Ale,
        centered: true,
        interval_counts: Some(counts),
    })
}

/// Data-weighted mean of an ALE curve given at interval edges.
pub fn ale_weighted_mean(values: &[f64], counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 * 0.5 * (values[k] + values[k + 1]))
        .sum::<f64>()
        / total as f64
}

/// Conditional (marginal) plot: at each grid value, the mean unperturbed
/// prediction of the `ceil(fraction * n)` observations closest in the
/// feature.
pub fn mplot<P: Predictor + ?Sized>(
    pred: &P,
    data: &Dataset,
    grid: &Grid,
    neighborhood_fraction: f64,
) -> Result<EffectCurve> {
    check_grid(data, grid)?;
    if !(neighborhood_fraction > 0.0 && neighborhood_fraction <= 1.0) {
        return invalid(format!("neighborhood fraction {neighborhood_fraction} not in (0, 1]"));
    }
    let n = data.n();
    let k = (neighborhood_fraction * n as f64).ceil() as usize;
    if k == 0 {
        return invalid("empty neighborhood");
    }
    let j = grid.feature_index;
    let yhat = pred.predict(data.features());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| data.column(j)[a].total_cmp(&data.column(j)[b]));
    let xs: Vec<f64> = order.iter().map(|&i| data.column(j)[i]).collect();

    let values = grid
        .values
        .iter()
        .map(|&g| {
            // grow a window [lo, hi) around the insertion point of g
            let start = xs.partition_point(|&x| x < g);
            let (mut lo, mut hi) = (start, start);
            while hi - lo < k {
                let take_left = match (lo > 0, hi < n) {
                    (true, true) => (g - xs[lo - 1]) <= (xs[hi] - g),
                    (true, false) => true,
                    (false, true) => false,
                    (false, false) => break,
                };
                if take_left {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            order[lo..hi].iter().map(|&i| yhat[i]).sum::<f64>() / (hi - lo) as f64
        })
        .collect();

    Ok(EffectCurve {
        grid: grid.clone(),
        values,
        per_observation: None,
        kind: EffectKind::Mplot,
        centered: false,
        interval_counts: None,
    })
}

impl EffectCurve {
    /// `grid,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["grid", "value"])?;
        for (g, v) in self.grid.values.iter().zip(&self.values) {
            w.write_record([g.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `grid,value,row_id` rows for every observation curve.
    pub fn write_observations_csv<W: Write>(&self, writer: W) -> Result<()> {
        let m = self
            .per_observation
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("curve has no per-observation values".into()))?;
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["grid", "value", "row_id"])?;
        for (i, row) in m.rows().into_iter().enumerate() {
            for (g, v) in self.grid.values.iter().zip(row.iter()) {
                w.write_record([g.to_string(), v.to_string(), i.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// The curve minus its plain mean over grid points.
    pub fn mean_centered(&self) -> Vec<f64> {
        let m = stats::mean(&self.values);
        self.values.iter().map(|v| v - m).collect()
    }
}

impl Effect2D {
    /// Long-form `a,b,value` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["a", "b", "value"])?;
        for (ia, a) in self.grid_a.values.iter().enumerate() {
            for (ib, b) in self.grid_b.values.iter().enumerate() {
                w.write_record([a.to_string(), b.to_string(), self.values[[ia, ib]].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
