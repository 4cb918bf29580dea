//! Ordinary least-squares linear regression, `f(x) = a . x + b`.

use serde_json::json;

use crate::error::Result;
use crate::linalg::{dot, least_squares, Matrix};
use crate::num::Real;
use crate::regress::TrainingSet;

#[derive(Debug, Clone)]
pub struct LinearModel<R> {
    coefficients: Vec<R>,
    intercept: R,
}

impl<R: Real> LinearModel<R> {
    pub fn fit(ts: &TrainingSet<R>) -> Result<Self> {
        let nf = ts.n_features();
        let rows: Vec<Vec<R>> = ts
            .inputs()
            .iter()
            .map(|x| {
                let mut r = x.clone();
                r.push(R::one());
                r
            })
            .collect();
        let beta = least_squares(&Matrix::from_rows(&rows), ts.responses())?;
        Ok(LinearModel {
            coefficients: beta[..nf].to_vec(),
            intercept: beta[nf],
        })
    }

    pub fn coefficients(&self) -> &[R] {
        &self.coefficients
    }

    pub fn intercept(&self) -> R {
        self.intercept
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    pub fn predict(&self, xs: &[Vec<R>]) -> Vec<R> {
        xs.iter()
            .map(|x| dot(&self.coefficients, x) + self.intercept)
            .collect()
    }

    pub fn payload(&self) -> serde_json::Value {
        json!({
            "kind": "linear",
            "coefficients": self.coefficients.iter().map(|c| c.to_f64_lossy()).collect::<Vec<_>>(),
            "intercept": self.intercept.to_f64_lossy(),
        })
    }
}
