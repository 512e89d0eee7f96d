//! Ordinary least squares with intercept.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView2};

use crate::data::Dataset;
use crate::model::Predictor;

pub const SINGULAR_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    /// Least-squares fit on centered data. A singular Gram matrix gets a
    /// ridge of [`SINGULAR_JITTER`] on its diagonal and a warning.
    pub fn fit(data: &Dataset) -> LinearModel {
        let (n, p) = (data.n(), data.p());
        let x = data.features();
        let y = data.target();
        let x_mean: Vec<f64> = (0..p).map(|j| x.column(j).sum() / n as f64).collect();
        let y_mean = y.sum() / n as f64;
        let xc = DMatrix::from_fn(n, p, |i, j| x[[i, j]] - x_mean[j]);
        let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
        let gram = xc.transpose() * &xc;
        let rhs = xc.transpose() * yc;

        let scale = gram.diagonal().max().max(1.0);
        let well_posed = gram.clone().cholesky().filter(|c| {
            let d = c.l_dirty().diagonal();
            d.iter().all(|v| v * v > 1e-12 * scale)
        });
        let beta = match well_posed {
            Some(chol) => chol.solve(&rhs),
            None => {
                log::warn!("singular design matrix in least squares fit; adding ridge jitter {SINGULAR_JITTER}");
                let ridged = gram + DMatrix::identity(p, p) * SINGULAR_JITTER;
                match ridged.clone().cholesky() {
                    Some(chol) => chol.solve(&rhs),
                    None => ridged.pseudo_inverse(1e-12).expect("pseudo-inverse") * rhs,
                }
            }
        };
        let coefficients: Vec<f64> = beta.iter().copied().collect();
        let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
        LinearModel { intercept, coefficients }
    }

    /// Coefficient of determination on `data`.
    pub fn r_squared(&self, data: &Dataset) -> f64 {
        let yhat = self.predict(data.features());
        let y = data.target();
        let mean = y.sum() / y.len() as f64;
        let ss_res: f64 = y.iter().zip(yhat.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        let ss_tot: f64 = y.iter().map(|a| (a - mean) * (a - mean)).sum();
        1.0 - ss_res / ss_tot
    }
}

impl Predictor for LinearModel {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.outer_iter()
            .map(|row| {
                self.intercept
                    + row.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect()
    }
}
