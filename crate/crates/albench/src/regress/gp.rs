//! Gaussian process regression with kernel hyperparameters fitted by
//! maximizing the log marginal likelihood over log-parameters.

use serde_json::json;

use crate::error::{Error, Result};
use crate::kernel::{gram, kernel_eval, kernel_grad_log, KernelConfig};
use crate::lbfgsb::{self, Options};
use crate::linalg::{dot, Cholesky};
use crate::num::Real;
use crate::regress::TrainingSet;

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GpModel<R> {
    config: KernelConfig<R>,
    train_inputs: Vec<Vec<R>>,
    chol: Cholesky<R>,
    weights: Vec<R>,
    log_marginal_likelihood: R,
    jitter: R,
    y_mean: R,
    y_std: R,
}

impl<R: Real> GpModel<R> {
    pub fn fit(ts: &TrainingSet<R>, kernel: &KernelConfig<R>) -> Result<Self> {
        kernel.validate()?;
        let y = ts.standardized_responses();
        let xs = ts.inputs().to_vec();

        // A single observation leaves the likelihood flat in the length
        // scale (up to jitter); keep the initial kernel.
        let config = if ts.len() == 1 {
            kernel.clone()
        } else {
            optimize_hyperparameters(kernel, &xs, &y)
        };

        let (chol, jitter) = factorize_with_jitter(&config, &xs)?;
        let weights = chol.solve(&y);
        let lml = log_marginal_likelihood_from(&chol, &weights, &y);

        Ok(GpModel {
            config,
            train_inputs: xs,
            chol,
            weights,
            log_marginal_likelihood: lml,
            jitter,
            y_mean: ts.response_mean(),
            y_std: ts.effective_std(),
        })
    }

    pub fn config(&self) -> &KernelConfig<R> {
        &self.config
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn weights(&self) -> &[R] {
        &self.weights
    }

    pub fn log_marginal_likelihood(&self) -> R {
        self.log_marginal_likelihood
    }

    pub fn jitter(&self) -> R {
        self.jitter
    }

    pub fn response_std(&self) -> R {
        self.y_std
    }

    /// Predictive mean, de-standardized to response units.
    pub fn predict(&self, xs: &[Vec<R>]) -> Vec<R> {
        xs.iter()
            .map(|x| {
                let k: Vec<R> = self
                    .train_inputs
                    .iter()
                    .map(|xi| kernel_eval(&self.config, xi, x))
                    .collect();
                self.y_mean + self.y_std * dot(&k, &self.weights)
            })
            .collect()
    }

    /// Predictive standard deviation in standardized units, zero-clipped.
    pub fn predict_std_standardized(&self, xs: &[Vec<R>]) -> Vec<R> {
        xs.iter()
            .map(|x| {
                let k: Vec<R> = self
                    .train_inputs
                    .iter()
                    .map(|xi| kernel_eval(&self.config, xi, x))
                    .collect();
                let v = self.chol.solve_lower(&k);
                let kxx = kernel_eval(&self.config, x, x);
                (kxx - dot(&v, &v)).max(R::zero()).sqrt()
            })
            .collect()
    }

    /// Predictive standard deviation scaled back to response units.
    pub fn predict_std(&self, xs: &[Vec<R>]) -> Vec<R> {
        self.predict_std_standardized(xs)
            .into_iter()
            .map(|s| s * self.y_std)
            .collect()
    }

    pub fn payload(&self) -> serde_json::Value {
        json!({
            "kind": "gp",
            "kernel": format!("{:?}", self.config.kind),
            "length_scale": self.config.length_scale.to_f64_lossy(),
            "sigma0": self.config.sigma0.to_f64_lossy(),
            "weights": self.weights.iter().map(|w| w.to_f64_lossy()).collect::<Vec<_>>(),
            "log_marginal_likelihood": self.log_marginal_likelihood.to_f64_lossy(),
            "jitter": self.jitter.to_f64_lossy(),
            "y_mean": self.y_mean.to_f64_lossy(),
            "y_std": self.y_std.to_f64_lossy(),
        })
    }
}

fn factorize_with_jitter<R: Real>(
    config: &KernelConfig<R>,
    xs: &[Vec<R>],
) -> Result<(Cholesky<R>, R)> {
    let mut jitter = R::lit(JITTER_START);
    loop {
        let k = gram(config, xs, jitter);
        match Cholesky::new(&k) {
            Ok(chol) => return Ok((chol, jitter)),
            Err(_) if jitter < R::lit(JITTER_MAX) => jitter = jitter * R::lit(10.0),
            Err(_) => return Err(Error::SingularSystem { escalated: true }),
        }
    }
}

fn log_marginal_likelihood_from<R: Real>(chol: &Cholesky<R>, alpha: &[R], y: &[R]) -> R {
    let n = R::lit(y.len() as f64);
    let two_pi = R::lit(std::f64::consts::TAU);
    -dot(y, alpha) / R::lit(2.0) - chol.log_diag_sum() - n / R::lit(2.0) * two_pi.ln()
}

/// Log marginal likelihood and its gradient with respect to the log
/// hyperparameters, at fixed starting jitter. Returns `None` when the
/// Gram matrix is not positive definite at this point.
pub fn lml_and_grad<R: Real>(
    config: &KernelConfig<R>,
    xs: &[Vec<R>],
    y: &[R],
) -> Option<(R, Vec<R>)> {
    let k = gram(config, xs, R::lit(JITTER_START));
    let chol = Cholesky::new(&k).ok()?;
    let alpha = chol.solve(y);
    let lml = log_marginal_likelihood_from(&chol, &alpha, y);

    // d LML / d theta = 0.5 * (alpha' dK alpha - tr(K^-1 dK))
    let n = xs.len();
    let k_inv = chol.inverse();
    let mut quad = R::zero();
    let mut trace = R::zero();
    for i in 0..n {
        for j in 0..n {
            let dk = kernel_grad_log(config, &xs[i], &xs[j]);
            quad = quad + alpha[i] * dk * alpha[j];
            trace = trace + k_inv.get(i, j) * dk;
        }
    }
    let grad = vec![(quad - trace) / R::lit(2.0)];
    Some((lml, grad))
}

fn optimize_hyperparameters<R: Real>(
    kernel: &KernelConfig<R>,
    xs: &[Vec<R>],
    y: &[R],
) -> KernelConfig<R> {
    let theta0 = kernel.log_params();
    let bounds = kernel.log_bounds();
    let objective = |theta: &[R]| {
        let cfg = kernel.with_log_params(theta);
        match lml_and_grad(&cfg, xs, y) {
            Some((lml, grad)) => (-lml, grad.iter().map(|&g| -g).collect()),
            // Not positive definite here; report a huge value so the line
            // search backs off.
            None => (R::lit(1e30), vec![R::zero(); theta.len()]),
        }
    };
    let sol = lbfgsb::minimize(objective, &theta0, &bounds, &Options::default());
    kernel.with_log_params(&sol.x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sin_set() -> TrainingSet<f64> {
        let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.2]).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (std::f64::consts::TAU * x[0]).sin())
            .collect();
        TrainingSet::new(xs, ys).unwrap()
    }

    #[test]
    fn single_point_interpolates_exactly() {
        let ts = TrainingSet::<f64>::new(vec![vec![0.3, 0.6]], vec![4.2]).unwrap();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Matern52)).unwrap();
        let p = m.predict(&[vec![0.3, 0.6]]);
        assert!((p[0] - 4.2).abs() < 1e-10);
    }

    #[test]
    fn sin_training_points_are_reproduced() {
        let ts = sin_set();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Rbf)).unwrap();
        let range: f64 = 2.0;
        let preds = m.predict(ts.inputs());
        for (p, &y) in preds.iter().zip(ts.responses()) {
            assert!((p - y).abs() <= 1e-6 * range, "{p} vs {y}");
        }
        // Oracle cross-check: dense solve at the optimized hyperparameters.
        let (chol, jitter) = factorize_with_jitter(m.config(), ts.inputs()).unwrap();
        assert_eq!(jitter, m.jitter());
        let w = chol.solve(&ts.standardized_responses());
        for (a, b) in w.iter().zip(m.weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sin_extrapolation_near_truth() {
        let ts = sin_set();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Rbf)).unwrap();
        let p = m.predict(&[vec![0.05]]);
        assert!((p[0] - (0.1 * std::f64::consts::PI).sin()).abs() < 0.1);
    }

    #[test]
    fn weights_solve_regularized_system() {
        let ts = sin_set();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Matern52)).unwrap();
        let k = gram(m.config(), ts.inputs(), m.jitter());
        let back = k.matvec(m.weights());
        let y = ts.standardized_responses();
        let resid: f64 = back
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(resid <= 1e-8, "residual {resid}");
    }

    #[test]
    fn std_vanishes_at_training_points_and_recovers_prior_far_away() {
        let ts = sin_set();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Rbf)).unwrap();
        for s in m.predict_std_standardized(ts.inputs()) {
            assert!(s <= 1e-4, "std at training point {s}");
        }

        let ts1 = TrainingSet::<f64>::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let mut cfg = KernelConfig::new(KernelKind::Rbf);
        cfg.length_scale = 1.0;
        let m1 = GpModel::fit(&ts1, &cfg).unwrap();
        // k = exp(-50) at distance 10; prior std is 1 in standardized units.
        let s = m1.predict_std_standardized(&[vec![10.0]]);
        assert!((s[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn optimized_lml_not_below_initial() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10 {
            let n = 4 + rng.gen_range(0..10);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let ys: Vec<f64> = xs
                .iter()
                .map(|x| (3.0 * x[0]).sin() + x[1] + 0.1 * rng.gen::<f64>())
                .collect();
            let ts = TrainingSet::new(xs, ys).unwrap();
            let init = KernelConfig::new(KernelKind::Matern52);
            let m = GpModel::fit(&ts, &init).unwrap();
            let y = ts.standardized_responses();
            let initial = lml_and_grad(&init, ts.inputs(), &y).map(|(l, _)| l).unwrap();
            assert!(
                m.log_marginal_likelihood() >= initial - 1e-9,
                "optimized {} below initial {}",
                m.log_marginal_likelihood(),
                initial
            );
        }
    }

    #[test]
    fn lml_gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let n = 3 + rng.gen_range(0..8);
            let xs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let ys: Vec<f64> = xs.iter().map(|x| (4.0 * x[0]).cos() * x[1]).collect();
            let ts = TrainingSet::new(xs, ys).unwrap();
            let y = ts.standardized_responses();
            let mut cfg = KernelConfig::new(KernelKind::Matern52);
            cfg.length_scale = 0.1 + 0.5 * rng.gen::<f64>();

            let (_, grad) = lml_and_grad(&cfg, ts.inputs(), &y).unwrap();
            let h = 1e-5;
            let t = cfg.log_params()[0];
            let lp = lml_and_grad(&cfg.with_log_params(&[t + h]), ts.inputs(), &y).unwrap().0;
            let lm = lml_and_grad(&cfg.with_log_params(&[t - h]), ts.inputs(), &y).unwrap().0;
            let fd = (lp - lm) / (2.0 * h);
            let rel = (grad[0] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel <= 1e-4, "trial {trial}: analytic {} vs fd {fd}", grad[0]);
        }
    }

    #[test]
    fn cubic_kernel_fits() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + x[0] * x[0]).collect();
        let ts = TrainingSet::new(xs, ys).unwrap();
        let m = GpModel::fit(&ts, &KernelConfig::new(KernelKind::Cubic)).unwrap();
        let preds = m.predict(ts.inputs());
        for (p, y) in preds.iter().zip(ts.responses()) {
            assert!((p - y).abs() < 1e-4, "{p} vs {y}");
        }
    }
}
