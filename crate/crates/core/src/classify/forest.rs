//! Random forest of axis-aligned CART trees split on Gini impurity.
//!
//! Each tree trains on a seeded bootstrap sample and considers a seeded
//! random subset of features at every node. Prediction is a plurality vote;
//! equal vote counts rank by label order.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Ranker, Sample};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of features tried per split; `None` means `sqrt(d)`.
    pub feature_subsample: Option<f64>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 20, min_leaf: 1, feature_subsample: None, seed: 0 }
    }
}

impl ForestParams {
    fn features_per_split(&self, dim: usize) -> usize {
        let m = match self.feature_subsample {
            Some(f) => (f * dim as f64).round() as usize,
            None => (dim as f64).sqrt().round() as usize,
        };
        m.clamp(1, dim)
    }

    fn validate(&self) -> Result<(), ClassifyError> {
        if self.n_trees == 0 || self.max_depth == 0 || self.min_leaf == 0 {
            return Err(ClassifyError::InvalidParam("n_trees, max_depth and min_leaf must be >= 1".into()));
        }
        if let Some(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(ClassifyError::InvalidParam("feature_subsample must lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { class: usize },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    dim: usize,
    classes: Vec<String>,
    pub trees: Vec<Tree>,
}

struct Builder<'a, R: Rng> {
    x: &'a [&'a [f64]],
    y: &'a [usize],
    n_classes: usize,
    params: &'a ForestParams,
    m_features: usize,
    rng: R,
    nodes: Vec<Node>,
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    // max_by_key returns the last maximum; iterate in reverse to prefer the
    // smallest class index
    counts.iter().enumerate().rev().max_by_key(|&(_, &c)| c).map(|(i, _)| i).unwrap_or(0)
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx.iter() {
            counts[self.y[i]] += 1;
        }
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.params.max_depth || idx.len() < 2 * self.params.min_leaf {
            return node_id;
        }
        let Some((feature, threshold)) = self.best_split(idx, &counts) else {
            return node_id;
        };
        let mid = partition(idx, |&i| self.x[i][feature] <= threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[node_id] = Node::Split { feature, threshold, left, right };
        node_id
    }

    fn best_split(&mut self, idx: &[usize], parent: &[usize]) -> Option<(usize, f64)> {
        let dim = self.x[0].len();
        let n = idx.len();
        let parent_gini = gini(parent, n);
        let min_leaf = self.params.min_leaf;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for feature in index::sample(&mut self.rng, dim, self.m_features).into_iter() {
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left = vec![0usize; self.n_classes];
            let mut right = parent.to_vec();
            for pos in 0..n - 1 {
                let c = self.y[order[pos]];
                left[c] += 1;
                right[c] -= 1;
                let (nl, nr) = (pos + 1, n - pos - 1);
                let v = self.x[order[pos]][feature];
                let v_next = self.x[order[pos + 1]][feature];
                if v == v_next || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if impurity < parent_gini - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, feature, v + (v_next - v) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition<F: Fn(&usize) -> bool>(idx: &mut [usize], pred: F) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|i| pred(i));
    let mid = yes.len();
    yes.extend(no);
    idx.copy_from_slice(&yes);
    mid
}

impl ForestModel {
    pub fn train(train: &[Sample], params: ForestParams) -> Result<Self, ClassifyError> {
        params.validate()?;
        if train.is_empty() {
            return Err(ClassifyError::EmptyModel);
        }
        let dim = train[0].0.len();
        if let Some((x, _)) = train.iter().find(|(x, _)| x.len() != dim) {
            return Err(ClassifyError::DimensionMismatch { expected: dim, found: x.len() });
        }
        if dim == 0 {
            return Err(ClassifyError::InvalidParam("zero-length features".into()));
        }
        let mut classes: Vec<String> = train.iter().map(|(_, l)| l.clone()).collect();
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(ClassifyError::SingleClass);
        }
        let x: Vec<&[f64]> = train.iter().map(|(v, _)| v.as_slice()).collect();
        let y: Vec<usize> = train.iter().map(|(_, l)| classes.binary_search(l).unwrap()).collect();
        let m_features = params.features_per_split(dim);
        let n = train.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(params.seed, t as u64));
                let mut sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut b = Builder {
                    x: &x,
                    y: &y,
                    n_classes: classes.len(),
                    params: &params,
                    m_features,
                    rng,
                    nodes: Vec::new(),
                };
                b.build(&mut sample, 0);
                Tree { nodes: b.nodes }
            })
            .collect();
        Ok(ForestModel { params, dim, classes, trees })
    }

    fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0usize; self.classes.len()];
        for t in &self.trees {
            votes[t.predict(x)] += 1;
        }
        votes
    }
}

impl Ranker for ForestModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self, x: &[f64]) -> Result<Vec<(String, f64)>, ClassifyError> {
        if x.len() != self.dim {
            return Err(ClassifyError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let votes = self.votes(x);
        let mut order: Vec<usize> = (0..self.classes.len()).collect();
        order.sort_by(|&a, &b| votes[b].cmp(&votes[a]).then(a.cmp(&b)));
        let n = self.trees.len() as f64;
        Ok(order.into_iter().map(|c| (self.classes[c].clone(), votes[c] as f64 / n)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_traces() -> Vec<Sample> {
        let mut out = Vec::new();
        for i in 0..20 {
            let jitter = (i % 3) as f64;
            out.push((vec![800_000.0 + jitter; 16], "low".to_string()));
            out.push((vec![2_300_000.0 - jitter; 16], "high".to_string()));
        }
        out
    }

    #[test]
    fn separable_classes() {
        let m = ForestModel::train(&constant_traces(), ForestParams { n_trees: 10, ..Default::default() }).unwrap();
        assert_eq!(m.rank(&[810_000.0; 16]).unwrap()[0], ("low".to_string(), 1.0));
        assert_eq!(m.rank(&[2_000_000.0; 16]).unwrap()[0].0, "high");
    }

    #[test]
    fn xor_defeats_stumps() {
        // 4x4 grid per quadrant, label = (x > 0) xor (y > 0)
        let mut data = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                let (x, y) = (i as f64 - 3.5, j as f64 - 3.5);
                let label = if (x > 0.0) ^ (y > 0.0) { "one" } else { "zero" };
                data.push((vec![x, y], label.to_string()));
            }
        }
        let stumps = ForestParams { n_trees: 25, max_depth: 1, feature_subsample: Some(1.0), ..Default::default() };
        let m = ForestModel::train(&data, stumps).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 1));
        let correct = data.iter().filter(|(x, l)| &m.rank(x).unwrap()[0].0 == l).count();
        let acc = correct as f64 / data.len() as f64;
        assert!(acc <= 0.75, "{acc}");
        let deep = ForestModel::train(&data, ForestParams { n_trees: 25, ..Default::default() }).unwrap();
        let correct = data.iter().filter(|(x, l)| &deep.rank(x).unwrap()[0].0 == l).count();
        assert!(correct as f64 / data.len() as f64 > 0.9);
    }

    #[test]
    fn deterministic_under_seed() {
        let p = ForestParams { n_trees: 8, seed: 11, ..Default::default() };
        let a = ForestModel::train(&constant_traces(), p).unwrap();
        let b = ForestModel::train(&constant_traces(), p).unwrap();
        assert_eq!(a, b);
        let c = ForestModel::train(&constant_traces(), ForestParams { seed: 12, ..p }).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn single_class_rejected() {
        let data = vec![(vec![1.0], "a".to_string()), (vec![2.0], "a".to_string())];
        assert!(matches!(ForestModel::train(&data, ForestParams::default()), Err(ClassifyError::SingleClass)));
    }

    #[test]
    fn leaf_tie_prefers_first_class() {
        assert_eq!(majority(&[2, 2, 1]), 0);
        assert_eq!(majority(&[0, 3, 3]), 1);
    }
}
