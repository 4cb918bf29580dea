//! The five regression techniques behind a single fit/predict contract.

mod forest;
mod gp;
mod linear;
mod mlp;
mod svr;

pub use forest::ForestModel;
pub use gp::{lml_and_grad, GpModel};
pub use linear::LinearModel;
pub use mlp::MlpModel;
pub use svr::SvrModel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelConfig, KernelKind};
use crate::num::Real;

/// Inputs in unit coordinates plus responses and their sample statistics.
#[derive(Debug, Clone)]
pub struct TrainingSet<R> {
    inputs: Vec<Vec<R>>,
    responses: Vec<R>,
    response_mean: R,
    response_std: R,
}

impl<R: Real> TrainingSet<R> {
    pub fn new(inputs: Vec<Vec<R>>, responses: Vec<R>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidTrainingSet("empty training set".into()));
        }
        if inputs.len() != responses.len() {
            return Err(Error::InvalidTrainingSet(format!(
                "{} inputs vs {} responses",
                inputs.len(),
                responses.len()
            )));
        }
        let nf = inputs[0].len();
        if inputs.iter().any(|r| r.len() != nf) {
            return Err(Error::InvalidTrainingSet("ragged input rows".into()));
        }
        for i in 0..inputs.len() {
            for j in 0..i {
                if inputs[i] == inputs[j] {
                    return Err(Error::InvalidTrainingSet(format!(
                        "duplicate input rows {j} and {i}"
                    )));
                }
            }
        }
        let n = R::lit(responses.len() as f64);
        let mean = responses.iter().copied().sum::<R>() / n;
        let var = responses.iter().map(|&y| (y - mean) * (y - mean)).sum::<R>() / n;
        Ok(TrainingSet {
            inputs,
            responses,
            response_mean: mean,
            response_std: var.sqrt(),
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<R>] {
        &self.inputs
    }

    pub fn responses(&self) -> &[R] {
        &self.responses
    }

    pub fn response_mean(&self) -> R {
        self.response_mean
    }

    pub fn response_std(&self) -> R {
        self.response_std
    }

    /// Responses standardized to zero mean, unit variance. A degenerate
    /// zero std leaves values centered only.
    pub fn standardized_responses(&self) -> Vec<R> {
        let std = self.effective_std();
        self.responses
            .iter()
            .map(|&y| (y - self.response_mean) / std)
            .collect()
    }

    pub fn effective_std(&self) -> R {
        if self.response_std > R::zero() {
            self.response_std
        } else {
            R::one()
        }
    }
}

/// Which regressor to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Gp,
    Forest,
    Svr,
    Mlp,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Gp => "gp",
            ModelKind::Forest => "forest",
            ModelKind::Svr => "svr",
            ModelKind::Mlp => "mlp",
        }
    }
}

/// Per-fit configuration; every numeric default mirrors the common library
/// defaults and can be overridden from the campaign config.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<R> {
    pub kernel: KernelConfig<R>,
    pub n_trees: usize,
    pub min_split: usize,
    pub svr_c: R,
    pub svr_epsilon: R,
    /// RBF width for the SVR; `None` derives 1 / (N_f * var(inputs)).
    pub svr_gamma: Option<R>,
    pub svr_tol: R,
    pub mlp_hidden: usize,
    pub mlp_learning_rate: R,
    pub mlp_epochs: usize,
    pub mlp_l2: R,
}

impl<R: Real> FitConfig<R> {
    pub fn with_kernel(kind: KernelKind) -> Self {
        FitConfig {
            kernel: KernelConfig::new(kind),
            n_trees: 10,
            min_split: 2,
            svr_c: R::one(),
            svr_epsilon: R::lit(0.1),
            svr_gamma: None,
            svr_tol: R::lit(1e-3),
            mlp_hidden: 10,
            mlp_learning_rate: R::lit(1e-3),
            mlp_epochs: 200,
            mlp_l2: R::lit(1e-4),
        }
    }
}

impl<R: Real> Default for FitConfig<R> {
    fn default() -> Self {
        FitConfig::with_kernel(KernelKind::Matern52)
    }
}

/// A fitted regressor.
#[derive(Debug, Clone)]
pub enum Model<R> {
    Linear(LinearModel<R>),
    Gp(GpModel<R>),
    Forest(ForestModel<R>),
    Svr(SvrModel<R>),
    Mlp(MlpModel<R>),
}

/// Fits a model of the requested kind. All stochastic fits are fully
/// determined by `seed`.
pub fn fit<R: Real>(
    kind: ModelKind,
    ts: &TrainingSet<R>,
    config: &FitConfig<R>,
    seed: u64,
) -> Result<Model<R>> {
    Ok(match kind {
        ModelKind::Linear => Model::Linear(LinearModel::fit(ts)?),
        ModelKind::Gp => Model::Gp(GpModel::fit(ts, &config.kernel)?),
        ModelKind::Forest => Model::Forest(ForestModel::fit(ts, config, seed)?),
        ModelKind::Svr => Model::Svr(SvrModel::fit(ts, config)?),
        ModelKind::Mlp => Model::Mlp(MlpModel::fit(ts, config, seed)?),
    })
}

impl<R: Real> Model<R> {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(_) => ModelKind::Linear,
            Model::Gp(_) => ModelKind::Gp,
            Model::Forest(_) => ModelKind::Forest,
            Model::Svr(_) => ModelKind::Svr,
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Predictive means in original response units.
    pub fn predict(&self, xs: &[Vec<R>]) -> Vec<R> {
        match self {
            Model::Linear(m) => m.predict(xs),
            Model::Gp(m) => m.predict(xs),
            Model::Forest(m) => m.predict(xs),
            Model::Svr(m) => m.predict(xs),
            Model::Mlp(m) => m.predict(xs),
        }
    }

    /// Predictive standard deviation in response units; GP only.
    pub fn predict_std(&self, xs: &[Vec<R>]) -> Result<Vec<R>> {
        match self {
            Model::Gp(m) => Ok(m.predict_std(xs)),
            other => Err(Error::Unsupported {
                kind: other.kind().as_str().into(),
                capability: "predictive standard deviation".into(),
            }),
        }
    }

    pub fn supports_std(&self) -> bool {
        matches!(self, Model::Gp(_))
    }

    /// Number of fitting parameters held by the model.
    pub fn num_parameters(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features() + 1,
            Model::Gp(m) => m.n_train() + m.config().n_hyperparameters(),
            Model::Forest(m) => m.total_leaves(),
            Model::Svr(m) => m.n_support() + 1,
            Model::Mlp(m) => m.n_weights() + m.n_biases(),
        }
    }

    /// Flat JSON payload for post-hoc inspection of traces.
    pub fn payload(&self) -> serde_json::Value {
        match self {
            Model::Linear(m) => m.payload(),
            Model::Gp(m) => m.payload(),
            Model::Forest(m) => m.payload(),
            Model::Svr(m) => m.payload(),
            Model::Mlp(m) => m.payload(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_set_rejects_duplicates_and_empties() {
        assert!(TrainingSet::<f64>::new(vec![], vec![]).is_err());
        assert!(TrainingSet::new(vec![vec![0.1], vec![0.1]], vec![1.0, 2.0]).is_err());
        assert!(TrainingSet::new(vec![vec![0.1]], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn training_set_statistics() {
        let ts = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![1.0, 3.0]).unwrap();
        assert_eq!(ts.response_mean(), 2.0);
        assert_eq!(ts.response_std(), 1.0);
    }

    #[test]
    fn degenerate_std_standardization_is_centering_only() {
        let ts = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![7.0, 7.0]).unwrap();
        assert_eq!(ts.response_std(), 0.0);
        assert_eq!(ts.standardized_responses(), vec![0.0, 0.0]);
    }

    #[test]
    fn parameter_counts_match_contract() {
        let ts = TrainingSet::new(
            vec![vec![0.0, 0.0], vec![0.2, 0.4], vec![0.5, 0.1], vec![0.8, 0.9], vec![1.0, 0.3]],
            vec![0.1, 0.4, 0.2, 0.9, 0.6],
        )
        .unwrap();
        let cfg = FitConfig::with_kernel(KernelKind::Rbf);

        let linear = fit(ModelKind::Linear, &ts, &cfg, 0).unwrap();
        assert_eq!(linear.num_parameters(), 3);

        let gp = fit(ModelKind::Gp, &ts, &cfg, 0).unwrap();
        assert_eq!(gp.num_parameters(), 6);

        let mlp = fit(ModelKind::Mlp, &ts, &cfg, 0).unwrap();
        assert_eq!(mlp.num_parameters(), 41); // 10(N_f + 1) weights + 11 intercepts
    }

    #[test]
    fn predict_std_unsupported_on_non_gp() {
        let ts = TrainingSet::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0]).unwrap();
        let m = fit(ModelKind::Linear, &ts, &FitConfig::default(), 0).unwrap();
        assert!(matches!(
            m.predict_std(&[vec![0.5]]),
            Err(Error::Unsupported { .. })
        ));
    }
}
