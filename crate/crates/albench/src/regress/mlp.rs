//! Single-hidden-layer perceptron (rectified linear units) trained
//! full-batch with Adam on standardized responses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Result;
use crate::num::Real;
use crate::regress::{FitConfig, TrainingSet};

#[derive(Debug, Clone)]
pub struct MlpModel<R> {
    hidden_weights: Vec<Vec<R>>, // [hidden][feature]
    hidden_biases: Vec<R>,
    output_weights: Vec<R>,
    output_bias: R,
    y_mean: R,
    y_std: R,
}

impl<R: Real> MlpModel<R> {
    pub fn fit(ts: &TrainingSet<R>, config: &FitConfig<R>, seed: u64) -> Result<Self> {
        let nf = ts.n_features();
        let h = config.mlp_hidden;
        let n = ts.len();
        let xs = ts.inputs();
        let y = ts.standardized_responses();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |fan_in: usize| {
            let bound = (1.0 / fan_in as f64).sqrt();
            R::lit(rng.gen_range(-bound..bound))
        };
        let mut w1: Vec<Vec<R>> = (0..h).map(|_| (0..nf).map(|_| uniform(nf)).collect()).collect();
        let mut b1: Vec<R> = (0..h).map(|_| uniform(nf)).collect();
        let mut w2: Vec<R> = (0..h).map(|_| uniform(h)).collect();
        let mut b2: R = uniform(h);

        // Adam state.
        let dim = h * nf + h + h + 1;
        let mut m = vec![R::zero(); dim];
        let mut v = vec![R::zero(); dim];
        let lr = config.mlp_learning_rate;
        let beta1 = R::lit(0.9);
        let beta2 = R::lit(0.999);
        let adam_eps = R::lit(1e-8);
        let l2 = config.mlp_l2;
        let n_r = R::lit(n as f64);

        for epoch in 0..config.mlp_epochs {
            // Forward and backward over the full batch.
            let mut gw1 = vec![vec![R::zero(); nf]; h];
            let mut gb1 = vec![R::zero(); h];
            let mut gw2 = vec![R::zero(); h];
            let mut gb2 = R::zero();
            for (x, &yi) in xs.iter().zip(&y) {
                let mut act = vec![R::zero(); h];
                let mut pred = b2;
                for j in 0..h {
                    let mut z = b1[j];
                    for f in 0..nf {
                        z = z + w1[j][f] * x[f];
                    }
                    let a = z.max(R::zero());
                    act[j] = a;
                    pred = pred + w2[j] * a;
                }
                let err = (pred - yi) / n_r;
                gb2 = gb2 + err;
                for j in 0..h {
                    gw2[j] = gw2[j] + err * act[j];
                    if act[j] > R::zero() {
                        let back = err * w2[j];
                        gb1[j] = gb1[j] + back;
                        for f in 0..nf {
                            gw1[j][f] = gw1[j][f] + back * x[f];
                        }
                    }
                }
            }
            // L2 on weights only.
            for j in 0..h {
                for f in 0..nf {
                    gw1[j][f] = gw1[j][f] + l2 * w1[j][f];
                }
                gw2[j] = gw2[j] + l2 * w2[j];
            }

            // Adam update over the flattened parameter vector.
            let t = R::lit((epoch + 1) as f64);
            let bc1 = R::one() - beta1.powf(t);
            let bc2 = R::one() - beta2.powf(t);
            let mut idx = 0;
            let step = |param: &mut R, grad: R, m: &mut [R], v: &mut [R], idx: &mut usize| {
                m[*idx] = beta1 * m[*idx] + (R::one() - beta1) * grad;
                v[*idx] = beta2 * v[*idx] + (R::one() - beta2) * grad * grad;
                let mhat = m[*idx] / bc1;
                let vhat = v[*idx] / bc2;
                *param = *param - lr * mhat / (vhat.sqrt() + adam_eps);
                *idx += 1;
            };
            for j in 0..h {
                for f in 0..nf {
                    step(&mut w1[j][f], gw1[j][f], &mut m, &mut v, &mut idx);
                }
            }
            for j in 0..h {
                step(&mut b1[j], gb1[j], &mut m, &mut v, &mut idx);
            }
            for j in 0..h {
                step(&mut w2[j], gw2[j], &mut m, &mut v, &mut idx);
            }
            step(&mut b2, gb2, &mut m, &mut v, &mut idx);
        }

        Ok(MlpModel {
            hidden_weights: w1,
            hidden_biases: b1,
            output_weights: w2,
            output_bias: b2,
            y_mean: ts.response_mean(),
            y_std: ts.effective_std(),
        })
    }

    pub fn n_weights(&self) -> usize {
        self.hidden_weights.iter().map(Vec::len).sum::<usize>() + self.output_weights.len()
    }

    pub fn n_biases(&self) -> usize {
        self.hidden_biases.len() + 1
    }

    pub fn predict(&self, xs: &[Vec<R>]) -> Vec<R> {
        xs.iter()
            .map(|x| {
                let mut out = self.output_bias;
                for (j, wj) in self.hidden_weights.iter().enumerate() {
                    let mut z = self.hidden_biases[j];
                    for (f, &w) in wj.iter().enumerate() {
                        z = z + w * x[f];
                    }
                    out = out + self.output_weights[j] * z.max(R::zero());
                }
                self.y_mean + self.y_std * out
            })
            .collect()
    }

    pub fn payload(&self) -> serde_json::Value {
        json!({
            "kind": "mlp",
            "hidden_weights": self
                .hidden_weights
                .iter()
                .flatten()
                .map(|w| w.to_f64_lossy())
                .collect::<Vec<_>>(),
            "hidden_biases": self.hidden_biases.iter().map(|w| w.to_f64_lossy()).collect::<Vec<_>>(),
            "output_weights": self.output_weights.iter().map(|w| w.to_f64_lossy()).collect::<Vec<_>>(),
            "output_bias": self.output_bias.to_f64_lossy(),
            "y_mean": self.y_mean.to_f64_lossy(),
            "y_std": self.y_std.to_f64_lossy(),
        })
    }
}
