//! Nearest-neighbour and RBF kernel ridge regressors.
//!
//! Both standardize inputs with the training mean and standard deviation.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Predictor;
use crate::stats;

#[derive(Debug, Clone)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: ArrayView2<'_, f64>) -> Self {
        let p = x.ncols();
        let mut mean = Vec::with_capacity(p);
        let mut scale = Vec::with_capacity(p);
        for j in 0..p {
            let col = x.column(j).to_vec();
            mean.push(stats::mean(&col));
            let s = stats::std_dev(&col);
            scale.push(if s > 0.0 { s } else { 1.0 });
        }
        Standardizer { mean, scale }
    }

    fn apply(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.scale[j];
            }
        }
        out
    }
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    std: Standardizer,
    x: Array2<f64>,
    y: Vec<f64>,
}

impl KnnModel {
    pub fn fit(data: &Dataset, k: usize) -> Result<KnnModel> {
        if k == 0 {
            return Err(Error::Fit("knn needs k >= 1".into()));
        }
        if data.n() < k {
            return Err(Error::Fit(format!("knn with k = {k} needs at least {k} rows, got {}", data.n())));
        }
        let std = Standardizer::fit(data.features());
        Ok(KnnModel { k, x: std.apply(data.features()), std, y: data.target().to_vec() })
    }
}

impl Predictor for KnnModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let q = self.std.apply(x);
        let mut d: Vec<(f64, usize)> = Vec::with_capacity(self.y.len());
        q.outer_iter()
            .map(|row| {
                d.clear();
                d.extend(self.x.outer_iter().enumerate().map(|(i, t)| (sq_dist(row, t), i)));
                let k = self.k;
                if k < d.len() {
                    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                }
                d[..k].iter().map(|&(_, i)| self.y[i]).sum::<f64>() / k as f64
            })
            .collect()
    }
}

/// `1 / median` of pairwise squared distances (at most 1000 rows used).
pub fn median_heuristic_gamma(x: ArrayView2<'_, f64>) -> f64 {
    let n = x.nrows().min(1000);
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            d.push(sq_dist(x.row(i), x.row(j)));
        }
    }
    let med = if d.is_empty() { 1.0 } else { stats::quantile(&d, 0.5) };
    if med > 0.0 { 1.0 / med } else { 1.0 }
}

#[derive(Debug, Clone)]
pub struct KernelRidgeModel {
    std: Standardizer,
    x: Array2<f64>,
    alpha: Vec<f64>,
    y_mean: f64,
    gamma: f64,
}

impl KernelRidgeModel {
    /// Solves `(K + lambda I) alpha = y - mean(y)` with
    /// `K_ab = exp(-gamma |a - b|^2)` on standardized inputs.
    pub fn fit(data: &Dataset, lambda: f64, gamma: Option<f64>) -> Result<KernelRidgeModel> {
        if !(lambda > 0.0) {
            return Err(Error::Fit(format!("kernel ridge needs lambda > 0, got {lambda}")));
        }
        let std = Standardizer::fit(data.features());
        let x = std.apply(data.features());
        let gamma = gamma.unwrap_or_else(|| median_heuristic_gamma(x.view()));
        if !(gamma > 0.0) {
            return Err(Error::Fit(format!("kernel bandwidth must be positive, got {gamma}")));
        }
        let n = data.n();
        let y_mean = data.target().sum() / n as f64;
        let mut k = DMatrix::from_fn(n, n, |i, j| (-gamma * sq_dist(x.row(i), x.row(j))).exp());
        for i in 0..n {
            k[(i, i)] += lambda;
        }
        let rhs = DVector::from_iterator(n, data.target().iter().map(|v| v - y_mean));
        let chol = k
            .cholesky()
            .ok_or_else(|| Error::Fit("kernel matrix not positive definite".into()))?;
        let alpha = chol.solve(&rhs).iter().copied().collect();
        Ok(KernelRidgeModel { std, x, alpha, y_mean, gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

impl Predictor for KernelRidgeModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let q = self.std.apply(x);
        q.outer_iter()
            .map(|row| {
                self.y_mean
                    + self
                        .x
                        .outer_iter()
                        .zip(&self.alpha)
                        .map(|(t, a)| a * (-self.gamma * sq_dist(row, t)).exp())
                        .sum::<f64>()
            })
            .collect()
    }
}
