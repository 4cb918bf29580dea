//! Query-selection strategies over the candidate pool.
//!
//! All deterministic strategies break ties to the lowest pool index, so a
//! run is reproducible from its seed alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::euclidean_distance;
use crate::num::Real;
use crate::regress::Model;
use crate::space::CandidatePool;

/// The five selection strategies. Config-file tokens are
/// `random | gi | go | gio | variational`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "random", alias = "r")]
    Random,
    #[serde(rename = "gi")]
    GreedyInput,
    #[serde(rename = "go")]
    GreedyOutput,
    #[serde(rename = "gio")]
    GreedyInputOutput,
    #[serde(rename = "variational", alias = "v")]
    Variational,
}

impl StrategyKind {
    pub fn token(&self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::GreedyInput => "gi",
            StrategyKind::GreedyOutput => "go",
            StrategyKind::GreedyInputOutput => "gio",
            StrategyKind::Variational => "variational",
        }
    }

    /// Report-column abbreviation (R, GI, GO, GIO, V).
    pub fn abbreviation(&self) -> &'static str {
        match self {
            StrategyKind::Random => "R",
            StrategyKind::GreedyInput => "GI",
            StrategyKind::GreedyOutput => "GO",
            StrategyKind::GreedyInputOutput => "GIO",
            StrategyKind::Variational => "V",
        }
    }

    /// Whether selection needs model predictions at all.
    pub fn needs_model(&self) -> bool {
        matches!(
            self,
            StrategyKind::GreedyOutput | StrategyKind::GreedyInputOutput | StrategyKind::Variational
        )
    }

    /// Whether selection needs a predictive standard deviation.
    pub fn needs_std(&self) -> bool {
        matches!(self, StrategyKind::Variational)
    }
}

/// Everything a strategy may look at when scoring candidates.
pub struct SelectionContext<'a, R> {
    pub pool: &'a CandidatePool,
    pub labeled_inputs: &'a [Vec<R>],
    pub labeled_responses: &'a [R],
    pub model: Option<&'a Model<R>>,
}

/// Minimum Euclidean distance from a candidate to the labeled inputs.
pub fn dist_input<R: Real>(candidate: &[R], labeled_inputs: &[Vec<R>]) -> Result<R> {
    labeled_inputs
        .iter()
        .map(|x| euclidean_distance(candidate, x))
        .fold(None, |acc: Option<R>, d| {
            Some(acc.map_or(d, |a| a.min(d)))
        })
        .ok_or(Error::EmptyLabeledSet)
}

/// Minimum absolute distance from a predicted response to the observed ones.
pub fn dist_output<R: Real>(predicted: R, labeled_responses: &[R]) -> Result<R> {
    labeled_responses
        .iter()
        .map(|&y| (predicted - y).abs())
        .fold(None, |acc: Option<R>, d| {
            Some(acc.map_or(d, |a| a.min(d)))
        })
        .ok_or(Error::EmptyLabeledSet)
}

/// Selects the next unlabeled pool index for the given strategy.
pub fn select_next<R: Real>(
    strategy: StrategyKind,
    ctx: &SelectionContext<'_, R>,
    seed: u64,
) -> Result<usize> {
    let unlabeled: Vec<usize> = ctx.pool.unlabeled_indices().collect();
    if unlabeled.is_empty() {
        return Err(Error::PoolExhausted);
    }
    if strategy.needs_model() {
        let model = ctx.model.ok_or_else(|| Error::IncompatibleStrategy {
            strategy: strategy.token().into(),
            requirement: "a fitted model".into(),
        })?;
        if strategy.needs_std() && !model.supports_std() {
            return Err(Error::IncompatibleStrategy {
                strategy: strategy.token().into(),
                requirement: "a model with predictive standard deviation".into(),
            });
        }
    }

    if strategy == StrategyKind::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        return Ok(unlabeled[rng.gen_range(0..unlabeled.len())]);
    }

    let candidates: Vec<Vec<R>> = unlabeled
        .iter()
        .map(|&i| unit_as::<R>(ctx.pool, i))
        .collect();
    let predictions: Option<Vec<R>> = match strategy {
        StrategyKind::GreedyOutput | StrategyKind::GreedyInputOutput => {
            Some(ctx.model.unwrap().predict(&candidates))
        }
        StrategyKind::Variational => Some(ctx.model.unwrap().predict_std(&candidates)?),
        _ => None,
    };

    let mut best: Option<(usize, R)> = None;
    for (k, &idx) in unlabeled.iter().enumerate() {
        let score = match strategy {
            StrategyKind::GreedyInput => dist_input(&candidates[k], ctx.labeled_inputs)?,
            StrategyKind::GreedyOutput => {
                dist_output(predictions.as_ref().unwrap()[k], ctx.labeled_responses)?
            }
            StrategyKind::GreedyInputOutput => {
                dist_input(&candidates[k], ctx.labeled_inputs)?
                    * dist_output(predictions.as_ref().unwrap()[k], ctx.labeled_responses)?
            }
            StrategyKind::Variational => predictions.as_ref().unwrap()[k],
            StrategyKind::Random => unreachable!(),
        };
        // Strictly-greater keeps the lowest index on ties.
        if best.map_or(true, |(_, s)| score > s) {
            best = Some((idx, score));
        }
    }
    Ok(best.expect("non-empty unlabeled set").0)
}

fn unit_as<R: Real>(pool: &CandidatePool, index: usize) -> Vec<R> {
    pool.points()[index].unit.iter().map(|&u| R::lit(u)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::{fit, FitConfig, ModelKind, TrainingSet};
    use crate::space::{build_pool, DimensionSpec, ParameterSpace, PoolSpec};

    fn square_pool(points_per_dim: usize) -> CandidatePool {
        let space = ParameterSpace::new(vec![
            DimensionSpec::linear("x", 0.0, 1.0),
            DimensionSpec::linear("y", 0.0, 1.0),
        ])
        .unwrap();
        build_pool(&space, &PoolSpec::Grid { points_per_dim }).unwrap()
    }

    #[test]
    fn dist_input_examples() {
        let labeled = vec![vec![0.0, 0.0]];
        assert_eq!(dist_input(&[0.0, 0.0], &labeled).unwrap(), 0.0);
        assert!((dist_input(&[1.0, 1.0], &labeled).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let labeled = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let d: f64 = dist_input(&[0.1, 0.0], &labeled).unwrap();
        assert!((d - 0.1).abs() < 1e-12);
        assert!(matches!(
            dist_input::<f64>(&[0.0, 0.0], &[]),
            Err(Error::EmptyLabeledSet)
        ));
    }

    #[test]
    fn dist_output_examples() {
        assert_eq!(dist_output(1.0, &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(dist_output(2.0, &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(dist_output(0.5, &[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(
            dist_output::<f64>(0.5, &[]),
            Err(Error::EmptyLabeledSet)
        ));
    }

    #[test]
    fn greedy_input_picks_farthest() {
        // Pool of 4 points; (0,0) labeled, candidates (1,1), (0.5,0.5), (0.1,0).
        let space = ParameterSpace::new(vec![
            DimensionSpec::linear("x", 0.0, 1.0),
            DimensionSpec::linear("y", 0.0, 1.0),
        ])
        .unwrap();
        let mut pool = crate::space::build_pool(&space, &PoolSpec::Grid { points_per_dim: 2 }).unwrap();
        // Use the 2x2 grid: (0,0) (0,1) (1,0) (1,1); label (0,0).
        pool.mark_labeled(0);
        let labeled = vec![vec![0.0, 0.0]];
        let responses = vec![0.0];
        let ctx = SelectionContext {
            pool: &pool,
            labeled_inputs: &labeled,
            labeled_responses: &responses,
            model: None,
        };
        // All three remaining corners: (0,1) and (1,0) at distance 1, (1,1) at sqrt(2).
        assert_eq!(select_next(StrategyKind::GreedyInput, &ctx, 0).unwrap(), 3);
    }

    #[test]
    fn random_with_single_unlabeled_is_forced() {
        let mut pool = square_pool(2);
        for i in 0..3 {
            pool.mark_labeled(i);
        }
        let ctx = SelectionContext::<f64> {
            pool: &pool,
            labeled_inputs: &[],
            labeled_responses: &[],
            model: None,
        };
        for seed in 0..10 {
            assert_eq!(select_next(StrategyKind::Random, &ctx, seed).unwrap(), 3);
        }
    }

    #[test]
    fn exhausted_pool_errors() {
        let mut pool = square_pool(2);
        for i in 0..4 {
            pool.mark_labeled(i);
        }
        let ctx = SelectionContext::<f64> {
            pool: &pool,
            labeled_inputs: &[],
            labeled_responses: &[],
            model: None,
        };
        assert!(matches!(
            select_next(StrategyKind::Random, &ctx, 0),
            Err(Error::PoolExhausted)
        ));
    }

    #[test]
    fn model_requirements_enforced() {
        let mut pool = square_pool(3);
        pool.mark_labeled(0);
        let labeled = vec![vec![0.0, 0.0]];
        let responses = vec![1.0];
        let no_model = SelectionContext::<f64> {
            pool: &pool,
            labeled_inputs: &labeled,
            labeled_responses: &responses,
            model: None,
        };
        for s in [
            StrategyKind::GreedyOutput,
            StrategyKind::GreedyInputOutput,
            StrategyKind::Variational,
        ] {
            assert!(matches!(
                select_next(s, &no_model, 0),
                Err(Error::IncompatibleStrategy { .. })
            ));
        }

        let ts = TrainingSet::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]], vec![0.0, 1.0]).unwrap();
        let linear = fit(ModelKind::Linear, &ts, &FitConfig::default(), 0).unwrap();
        let with_linear = SelectionContext {
            pool: &pool,
            labeled_inputs: &labeled,
            labeled_responses: &responses,
            model: Some(&linear),
        };
        assert!(matches!(
            select_next(StrategyKind::Variational, &with_linear, 0),
            Err(Error::IncompatibleStrategy { .. })
        ));
        assert!(select_next(StrategyKind::GreedyOutput, &with_linear, 0).is_ok());
    }

    #[test]
    fn greedy_input_until_exhaustion_visits_every_point_once() {
        let mut pool = square_pool(4);
        pool.mark_labeled(5);
        let mut labeled = vec![pool.points()[5].unit.clone()];
        let mut responses = vec![0.0];
        let mut seen = std::collections::BTreeSet::from([5usize]);
        for _ in 0..15 {
            let idx = {
                let ctx = SelectionContext {
                    pool: &pool,
                    labeled_inputs: &labeled,
                    labeled_responses: &responses,
                    model: None,
                };
                select_next(StrategyKind::GreedyInput, &ctx, 0).unwrap()
            };
            assert!(seen.insert(idx), "index {idx} selected twice");
            pool.mark_labeled(idx);
            labeled.push(pool.points()[idx].unit.clone());
            responses.push(0.0);
        }
        assert_eq!(seen.len(), 16);
    }

    #[test]
    fn gio_scale_invariance() {
        // Multiplying responses (and predictions) by a positive constant
        // must not change the argmax of the product score.
        let mut pool = square_pool(5);
        let design = crate::space::initial_design(&pool, 4).unwrap();
        let mut labeled = Vec::new();
        let mut responses = Vec::new();
        for &i in &design {
            pool.mark_labeled(i);
            labeled.push(pool.points()[i].unit.clone());
            responses.push(pool.points()[i].unit[0] + 2.0 * pool.points()[i].unit[1] + 0.3);
        }
        let pick = |scale: f64| {
            let scaled: Vec<f64> = responses.iter().map(|&y| y * scale).collect();
            let ts = TrainingSet::new(labeled.clone(), scaled.clone()).unwrap();
            let model = fit(ModelKind::Linear, &ts, &FitConfig::default(), 0).unwrap();
            let ctx = SelectionContext {
                pool: &pool,
                labeled_inputs: &labeled,
                labeled_responses: &scaled,
                model: Some(&model),
            };
            select_next(StrategyKind::GreedyInputOutput, &ctx, 0).unwrap()
        };
        let base = pick(1.0);
        for scale in [0.01, 3.0, 1e4] {
            assert_eq!(pick(scale), base);
        }
    }
}
