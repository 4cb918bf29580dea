//! Covariance kernels for the Gaussian process regressor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, euclidean_distance, Matrix};
use crate::num::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Rbf,
    Matern52,
    Cubic,
}

/// Kernel hyperparameters in unit-cube units.
///
/// `length_scale` is isotropic and applies to rbf/matern52; `sigma0` only
/// applies to the cubic kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig<R> {
    pub kind: KernelKind,
    pub length_scale: R,
    pub sigma0: R,
    pub length_scale_bounds: (R, R),
    pub sigma0_bounds: (R, R),
}

impl<R: Real> KernelConfig<R> {
    pub fn new(kind: KernelKind) -> Self {
        KernelConfig {
            kind,
            // Initial length scale fixed at 0.1 on the unit cube.
            length_scale: R::lit(0.1),
            sigma0: R::one(),
            length_scale_bounds: (R::lit(1e-5), R::lit(1e5)),
            sigma0_bounds: (R::lit(1e-5), R::lit(1e5)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.length_scale_bounds;
        if !(lo > R::zero() && lo < hi) {
            return Err(Error::InvalidKernel("length_scale_bounds must be positive and ordered".into()));
        }
        if self.length_scale <= R::zero() {
            return Err(Error::InvalidKernel("length_scale must be > 0".into()));
        }
        if self.length_scale < lo || self.length_scale > hi {
            return Err(Error::InvalidKernel("length_scale outside bounds".into()));
        }
        if self.kind == KernelKind::Cubic {
            let (slo, shi) = self.sigma0_bounds;
            if !(slo > R::zero() && slo < shi) {
                return Err(Error::InvalidKernel("sigma0_bounds must be positive and ordered".into()));
            }
            if self.sigma0 < R::zero() {
                return Err(Error::InvalidKernel("sigma0 must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Free hyperparameters, as log values in optimization order.
    pub fn log_params(&self) -> Vec<R> {
        match self.kind {
            KernelKind::Rbf | KernelKind::Matern52 => vec![self.length_scale.ln()],
            KernelKind::Cubic => vec![self.sigma0.ln()],
        }
    }

    /// Bounds matching [`Self::log_params`].
    pub fn log_bounds(&self) -> Vec<(R, R)> {
        match self.kind {
            KernelKind::Rbf | KernelKind::Matern52 => {
                vec![(self.length_scale_bounds.0.ln(), self.length_scale_bounds.1.ln())]
            }
            KernelKind::Cubic => vec![(self.sigma0_bounds.0.ln(), self.sigma0_bounds.1.ln())],
        }
    }

    pub fn with_log_params(&self, theta: &[R]) -> Self {
        let mut out = self.clone();
        match self.kind {
            KernelKind::Rbf | KernelKind::Matern52 => out.length_scale = theta[0].exp(),
            KernelKind::Cubic => out.sigma0 = theta[0].exp(),
        }
        out
    }

    pub fn n_hyperparameters(&self) -> usize {
        match self.kind {
            KernelKind::Rbf | KernelKind::Matern52 => 1,
            // Cubic carries sigma0 on top of the (inactive) length scale.
            KernelKind::Cubic => 2,
        }
    }
}

/// Evaluates `k(xi, xj)`.
pub fn kernel_eval<R: Real>(config: &KernelConfig<R>, xi: &[R], xj: &[R]) -> R {
    assert_eq!(xi.len(), xj.len(), "kernel inputs must have equal length");
    match config.kind {
        KernelKind::Rbf => {
            let r = euclidean_distance(xi, xj) / config.length_scale;
            (-r * r / R::lit(2.0)).exp()
        }
        KernelKind::Matern52 => {
            let r = euclidean_distance(xi, xj) / config.length_scale;
            let s = R::lit(5.0).sqrt() * r;
            (R::one() + s + s * s / R::lit(3.0)) * (-s).exp()
        }
        KernelKind::Cubic => {
            let base = config.sigma0 * config.sigma0 + dot(xi, xj);
            base * base * base
        }
    }
}

/// Derivative of `k(xi, xj)` with respect to the log hyperparameter in
/// optimization order (log length scale, or log sigma0 for cubic).
pub fn kernel_grad_log<R: Real>(config: &KernelConfig<R>, xi: &[R], xj: &[R]) -> R {
    match config.kind {
        KernelKind::Rbf => {
            let r = euclidean_distance(xi, xj) / config.length_scale;
            let r2 = r * r;
            (-r2 / R::lit(2.0)).exp() * r2
        }
        KernelKind::Matern52 => {
            let r = euclidean_distance(xi, xj) / config.length_scale;
            let s = R::lit(5.0).sqrt() * r;
            // d k / d log l = exp(-s) * s^2 (1 + s) / 3
            (-s).exp() * s * s * (R::one() + s) / R::lit(3.0)
        }
        KernelKind::Cubic => {
            let base = config.sigma0 * config.sigma0 + dot(xi, xj);
            // d k / d log sigma0 = 3 base^2 * 2 sigma0^2
            R::lit(6.0) * base * base * config.sigma0 * config.sigma0
        }
    }
}

/// Gram matrix over a set of rows, with `jitter` added to the diagonal.
pub fn gram<R: Real>(config: &KernelConfig<R>, xs: &[Vec<R>], jitter: R) -> Matrix<R> {
    let n = xs.len();
    let mut k = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel_eval(config, &xs[i], &xs[j]);
            k.set(i, j, v);
            k.set(j, i, v);
        }
        k.set(i, i, k.get(i, i) + jitter);
    }
    k
}
