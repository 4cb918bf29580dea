//! Random forest regression: bootstrapped CART trees with
//! variance-reduction splits, averaged at prediction time.
//!
//! Trees consider every feature at each split and are grown until leaves
//! are pure or hold fewer samples than the minimum split size.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Result;
use crate::num::Real;
use crate::regress::{FitConfig, TrainingSet};

#[derive(Debug, Clone)]
enum Node<R> {
    Leaf { mean: R, count: usize },
    Split { dim: usize, threshold: R, left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Tree<R> {
    nodes: Vec<Node<R>>,
}

impl<R: Real> Tree<R> {
    fn grow(
        inputs: &[Vec<R>],
        responses: &[R],
        sample: &[usize],
        min_split: usize,
    ) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow_node(inputs, responses, sample.to_vec(), min_split);
        tree
    }

    fn grow_node(
        &mut self,
        inputs: &[Vec<R>],
        responses: &[R],
        sample: Vec<usize>,
        min_split: usize,
    ) -> usize {
        let n = sample.len();
        debug_assert!(n >= 1);
        let nr = R::lit(n as f64);
        let mean = sample.iter().map(|&i| responses[i]).sum::<R>() / nr;
        let sse = sample
            .iter()
            .map(|&i| (responses[i] - mean) * (responses[i] - mean))
            .sum::<R>();

        if n < min_split || sse <= R::zero() {
            return self.push(Node::Leaf { mean, count: n });
        }

        // Exhaustive best split over all features and midpoints.
        let nf = inputs[0].len();
        let mut best: Option<(usize, R, R)> = None; // (dim, threshold, child sse)
        for dim in 0..nf {
            let mut order = sample.clone();
            order.sort_by(|&a, &b| {
                inputs[a][dim]
                    .partial_cmp(&inputs[b][dim])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            // Prefix sums over the sorted order.
            let mut sum_left = R::zero();
            let mut sq_left = R::zero();
            let total_sum: R = order.iter().map(|&i| responses[i]).sum();
            let total_sq: R = order.iter().map(|&i| responses[i] * responses[i]).sum();
            for k in 0..n - 1 {
                let yi = responses[order[k]];
                sum_left = sum_left + yi;
                sq_left = sq_left + yi * yi;
                let a = inputs[order[k]][dim];
                let b = inputs[order[k + 1]][dim];
                if a == b {
                    continue;
                }
                let nl = R::lit((k + 1) as f64);
                let nrr = R::lit((n - k - 1) as f64);
                let sum_right = total_sum - sum_left;
                let sq_right = total_sq - sq_left;
                let child_sse =
                    (sq_left - sum_left * sum_left / nl) + (sq_right - sum_right * sum_right / nrr);
                if best.as_ref().map_or(true, |&(_, _, s)| child_sse < s) {
                    best = Some((dim, (a + b) / R::lit(2.0), child_sse));
                }
            }
        }

        let Some((dim, threshold, _)) = best else {
            // All samples identical in every feature.
            return self.push(Node::Leaf { mean, count: n });
        };

        let (left, right): (Vec<usize>, Vec<usize>) =
            sample.iter().partition(|&&i| inputs[i][dim] <= threshold);
        let idx = self.push(Node::Leaf { mean, count: n }); // placeholder
        let l = self.grow_node(inputs, responses, left, min_split);
        let r = self.grow_node(inputs, responses, right, min_split);
        self.nodes[idx] = Node::Split { dim, threshold, left: l, right: r };
        idx
    }

    fn push(&mut self, node: Node<R>) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn predict_one(&self, x: &[R]) -> R {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { mean, .. } => return *mean,
                Node::Split { dim, threshold, left, right } => {
                    at = if x[*dim] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    fn min_leaf_size(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { count, .. } => Some(*count),
                _ => None,
            })
            .min()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel<R> {
    trees: Vec<Tree<R>>,
}

impl<R: Real> ForestModel<R> {
    pub fn fit(ts: &TrainingSet<R>, config: &FitConfig<R>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = ts.len();
        let trees = (0..config.n_trees)
            .map(|_| {
                let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                Tree::grow(ts.inputs(), ts.responses(), &sample, config.min_split)
            })
            .collect();
        Ok(ForestModel { trees })
    }

    pub fn predict(&self, xs: &[Vec<R>]) -> Vec<R> {
        let nt = R::lit(self.trees.len() as f64);
        xs.iter()
            .map(|x| self.trees.iter().map(|t| t.predict_one(x)).sum::<R>() / nt)
            .collect()
    }

    pub fn total_leaves(&self) -> usize {
        self.trees.iter().map(Tree::leaf_count).sum()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn min_leaf_size(&self) -> usize {
        self.trees.iter().map(Tree::min_leaf_size).min().unwrap_or(0)
    }

    pub fn payload(&self) -> serde_json::Value {
        json!({
            "kind": "forest",
            "n_trees": self.trees.len(),
            "total_leaves": self.total_leaves(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regress::FitConfig;
    use rand::Rng;

    fn fit_forest(xs: Vec<Vec<f64>>, ys: Vec<f64>, seed: u64) -> ForestModel<f64> {
        let ts = TrainingSet::new(xs, ys).unwrap();
        ForestModel::fit(&ts, &FitConfig::default(), seed).unwrap()
    }

    #[test]
    fn constant_responses_predict_constant() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
        let m = fit_forest(xs, vec![7.0; 8], 1);
        for p in m.predict(&[vec![0.05], vec![0.5], vec![0.93]]) {
            assert_eq!(p, 7.0);
        }
    }

    #[test]
    fn every_leaf_covers_at_least_one_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[1] + x[0]).collect();
        let m = fit_forest(xs, ys, 5);
        assert_eq!(m.n_trees(), 10);
        assert!(m.min_leaf_size() >= 1);
    }

    #[test]
    fn predictions_within_training_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let xs: Vec<Vec<f64>> = (0..25)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| (5.0 * x[0]).sin() - x[1]).collect();
        let (lo, hi) = ys
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
        let m = fit_forest(xs, ys, 2);
        for _ in 0..100 {
            let q = vec![rng.gen::<f64>(), rng.gen::<f64>()];
            let p = m.predict(&[q])[0];
            assert!(p >= lo && p <= hi);
        }
    }

    #[test]
    fn fits_are_bit_identical_for_equal_seeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let xs: Vec<Vec<f64>> = (0..20).map(|_| vec![rng.gen::<f64>()]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x[0].exp()).collect();
        let a = fit_forest(xs.clone(), ys.clone(), 77);
        let b = fit_forest(xs, ys, 77);
        let queries: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        assert_eq!(a.predict(&queries), b.predict(&queries));
    }
}
