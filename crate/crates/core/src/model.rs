//! The black-box prediction contract and loss functions.

use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;

/// A fitted model seen from outside: rows in, predictions out.
///
/// Implementations must be deterministic and must not mutate the input.
/// They are shared across worker threads.
pub trait Predictor: Send + Sync {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        (**self).predict(x)
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        (**self).predict(x)
    }
}

impl<P: Predictor + ?Sized> Predictor for Arc<P> {
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        (**self).predict(x)
    }
}

/// Wraps a per-row function as a predictor.
pub struct FnPredictor<F>(pub F);

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(ArrayView1<'_, f64>) -> f64 + Send + Sync,
{
    fn predict(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        x.outer_iter().map(|row| (self.0)(row)).collect()
    }
}

pub fn fn_predictor<F>(f: F) -> FnPredictor<F>
where
    F: Fn(ArrayView1<'_, f64>) -> f64 + Send + Sync,
{
    FnPredictor(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    #[default]
    SquaredError,
    AbsoluteError,
}

impl Loss {
    /// Mean loss over observations.
    pub fn eval(self, y_true: ArrayView1<'_, f64>, y_pred: ArrayView1<'_, f64>) -> f64 {
        assert_eq!(y_true.len(), y_pred.len(), "loss on vectors of different length");
        let n = y_true.len() as f64;
        let total: f64 = y_true
            .iter()
            .zip(y_pred.iter())
            .map(|(&a, &b)| self.pointwise(a, b))
            .sum();
        total / n
    }

    pub fn pointwise(self, y: f64, yhat: f64) -> f64 {
        match self {
            Loss::SquaredError => (y - yhat) * (y - yhat),
            Loss::AbsoluteError => (y - yhat).abs(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::SquaredError => "squared_error",
            Loss::AbsoluteError => "absolute_error",
        }
    }

    pub fn parse(s: &str) -> Option<Loss> {
        match s {
            "squared_error" | "mse" => Some(Loss::SquaredError),
            "absolute_error" | "mae" => Some(Loss::AbsoluteError),
            _ => None,
        }
    }
}

/// Mean loss of `pred` on `data`.
pub fn evaluate<P: Predictor + ?Sized>(pred: &P, data: &Dataset, loss: Loss) -> f64 {
    let yhat = pred.predict(data.features());
    loss.eval(data.target(), yhat.view())
}
