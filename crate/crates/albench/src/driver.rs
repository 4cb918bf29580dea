//! The active-learning loop: initialize, fit, select, query, refit, until
//! the query budget is spent.

use serde::{Deserialize, Serialize};

use crate::bench::{average_relative_error, TestSet};
use crate::error::{Error, Result};
use crate::regress::{fit, FitConfig, Model, ModelKind, TrainingSet};
use crate::sample::{select_next, SelectionContext, StrategyKind};
use crate::sim::{FailurePolicy, Simulator};
use crate::space::{initial_design, CandidatePool};

/// One run's full configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: StrategyKind,
    pub model_kind: ModelKind,
    pub fit: FitConfig<f64>,
    /// Initialization design size.
    pub n0: usize,
    /// Queries after initialization.
    pub n_queries: usize,
    pub seed: u64,
    /// Compute the test-set error after every post-initialization query.
    pub trace_errors: bool,
}

/// The record of one run.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunTrace {
    pub queried_indices: Vec<usize>,
    pub raw_points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
    /// One entry per post-initialization query, when traced.
    pub per_step_error: Option<Vec<f64>>,
    pub final_model: serde_json::Value,
    pub seed: u64,
    #[serde(skip)]
    pub model: Option<Model<f64>>,
}

/// SplitMix64; used to derive independent per-step seeds from the run seed.
pub fn mix_seed(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn step_seed(seed: u64, salt: u64, step: usize) -> u64 {
    mix_seed(seed ^ mix_seed(salt) ^ (step as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs one active-learning campaign leg. The pool must be fresh; its
/// labeled set is updated in place. Fully deterministic given the seed.
pub fn run_active_learning(
    pool: &mut CandidatePool,
    sim: &Simulator,
    config: &RunConfig,
    test_set: Option<&TestSet>,
) -> Result<RunTrace> {
    if config.n0 < 1
        || !pool.labeled().is_empty()
        || config.n0 + config.n_queries > pool.len()
    {
        return Err(Error::InvalidRunConfig(format!(
            "need a fresh pool with 1 <= n0 and n0 + n_queries <= {}, got n0 = {}, n_queries = {}",
            pool.len(),
            config.n0,
            config.n_queries
        )));
    }
    if config.strategy.needs_std() && config.model_kind != ModelKind::Gp {
        return Err(Error::IncompatibleStrategy {
            strategy: config.strategy.token().into(),
            requirement: "a model with predictive standard deviation (gp)".into(),
        });
    }
    let test_set = if config.trace_errors {
        Some(test_set.ok_or_else(|| {
            Error::InvalidRunConfig("trace_errors requires a test set".into())
        })?)
    } else {
        None
    };

    let mut queried_indices = Vec::with_capacity(config.n0 + config.n_queries);
    let mut raw_points = Vec::new();
    let mut unit_points: Vec<Vec<f64>> = Vec::new();
    let mut responses = Vec::new();

    // Initialization is deterministic and failure here always aborts:
    // resampling only applies to strategy-driven queries.
    for idx in initial_design(pool, config.n0)? {
        let p = pool.points()[idx].clone();
        let y = sim.evaluate(&p.raw)?;
        pool.mark_labeled(idx);
        queried_indices.push(idx);
        raw_points.push(p.raw);
        unit_points.push(p.unit);
        responses.push(y);
    }

    let refit = |unit_points: &[Vec<f64>], responses: &[f64], step: usize| -> Result<Model<f64>> {
        let ts = TrainingSet::new(unit_points.to_vec(), responses.to_vec())?;
        fit(config.model_kind, &ts, &config.fit, step_seed(config.seed, 1, step))
    };
    let mut model = refit(&unit_points, &responses, 0)?;

    let mut per_step_error = config.trace_errors.then(Vec::new);
    for step in 0..config.n_queries {
        // Select and evaluate; under the resample policy a failed point is
        // consumed without a label and the sampler is asked again.
        let (idx, y) = loop {
            let idx = {
                let ctx = SelectionContext {
                    pool,
                    labeled_inputs: &unit_points,
                    labeled_responses: &responses,
                    model: Some(&model),
                };
                select_next(config.strategy, &ctx, step_seed(config.seed, 2, step))?
            };
            match sim.evaluate(&pool.points()[idx].raw) {
                Ok(y) => break (idx, y),
                Err(e @ Error::QueryFailure { .. }) => match sim.failure_policy() {
                    FailurePolicy::Abort => return Err(e),
                    FailurePolicy::Resample => {
                        pool.mark_labeled(idx);
                        continue;
                    }
                },
                Err(e) => return Err(e),
            }
        };
        let p = pool.points()[idx].clone();
        pool.mark_labeled(idx);
        queried_indices.push(idx);
        raw_points.push(p.raw);
        unit_points.push(p.unit);
        responses.push(y);

        model = refit(&unit_points, &responses, step + 1)?;
        if let (Some(errors), Some(ts)) = (per_step_error.as_mut(), test_set) {
            let predicted = model.predict(&ts.unit_inputs());
            errors.push(average_relative_error(&ts.true_values, &predicted)?);
        }
    }

    Ok(RunTrace {
        queried_indices,
        raw_points,
        responses,
        per_step_error,
        final_model: model.payload(),
        seed: config.seed,
        model: Some(model),
    })
}
