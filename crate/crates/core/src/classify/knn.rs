//! Brute-force k-nearest-neighbour ranking under euclidean distance.
//!
//! Neighbours are the `k` training points with the smallest distance, ties
//! broken by training order. Classes that received votes rank first, by
//! vote count (descending), then mean neighbour distance, then label.
//! Classes without votes follow, by distance to their closest training
//! point, then label. The score of a class is its vote fraction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{ClassifyError, Ranker, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    dim: usize,
    classes: Vec<String>,
    points: Vec<Vec<f64>>,
    point_class: Vec<usize>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl KnnModel {
    pub fn fit(k: usize, train: &[Sample]) -> Result<Self, ClassifyError> {
        if train.is_empty() {
            return Err(ClassifyError::EmptyModel);
        }
        if k == 0 {
            return Err(ClassifyError::InvalidParam("k must be >= 1".into()));
        }
        if k > train.len() {
            return Err(ClassifyError::KTooLarge { k, n: train.len() });
        }
        let dim = train[0].0.len();
        if let Some((x, _)) = train.iter().find(|(x, _)| x.len() != dim) {
            return Err(ClassifyError::DimensionMismatch { expected: dim, found: x.len() });
        }
        let mut classes: Vec<String> = train.iter().map(|(_, l)| l.clone()).collect();
        classes.sort();
        classes.dedup();
        let point_class = train.iter().map(|(_, l)| classes.binary_search(l).unwrap()).collect();
        Ok(KnnModel { k, dim, classes, points: train.iter().map(|(x, _)| x.clone()).collect(), point_class })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Ranker for KnnModel {
    fn classes(&self) -> &[String] {
        &self.classes
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn rank(&self, x: &[f64]) -> Result<Vec<(String, f64)>, ClassifyError> {
        if self.points.is_empty() {
            return Err(ClassifyError::EmptyModel);
        }
        if x.len() != self.dim {
            return Err(ClassifyError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        let dist: Vec<f64> = self.points.iter().map(|p| euclidean(p, x)).collect();
        let by_dist_then_index = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
        let k = self.k.min(dist.len());
        let mut order: Vec<usize> = (0..dist.len()).collect();
        if k < order.len() {
            order.select_nth_unstable_by(k - 1, by_dist_then_index);
            order.truncate(k);
        }
        order.sort_by(by_dist_then_index);

        let n_classes = self.classes.len();
        let mut votes = vec![0usize; n_classes];
        let mut dist_sum = vec![0f64; n_classes];
        let mut nearest = vec![f64::INFINITY; n_classes];
        for &i in &order {
            votes[self.point_class[i]] += 1;
            dist_sum[self.point_class[i]] += dist[i];
        }
        for (i, &d) in dist.iter().enumerate() {
            let c = self.point_class[i];
            if d < nearest[c] {
                nearest[c] = d;
            }
        }
        let mut ranked: Vec<usize> = (0..n_classes).collect();
        ranked.sort_by(|&a, &b| match (votes[a], votes[b]) {
            (0, 0) => nearest[a].total_cmp(&nearest[b]).then(a.cmp(&b)),
            (0, _) => Ordering::Greater,
            (_, 0) => Ordering::Less,
            (va, vb) => {
                vb.cmp(&va).then((dist_sum[a] / va as f64).total_cmp(&(dist_sum[b] / vb as f64))).then(a.cmp(&b))
            }
        });
        Ok(ranked.into_iter().map(|c| (self.classes[c].clone(), votes[c] as f64 / k as f64)).collect())
    }
}

/// The `k_out` best labels for `x` with their vote fractions.
pub fn knn_predict(model: &KnnModel, x: &[f64], k_out: usize) -> Result<Vec<(String, f64)>, ClassifyError> {
    if k_out == 0 {
        return Err(ClassifyError::InvalidParam("k_out must be >= 1".into()));
    }
    let mut ranked = model.rank(x)?;
    ranked.truncate(k_out);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(x: &[f64], l: &str) -> Sample {
        (x.to_vec(), l.to_string())
    }

    #[test]
    fn single_point_model() {
        let m = KnnModel::fit(1, &[s(&[1.0, 2.0], "A")]).unwrap();
        assert_eq!(knn_predict(&m, &[100.0, -3.0], 1).unwrap(), vec![("A".to_string(), 1.0)]);
    }

    #[test]
    fn exact_match_k1() {
        let m = KnnModel::fit(1, &[s(&[0.0], "A"), s(&[5.0], "B"), s(&[9.0], "C")]).unwrap();
        let r = knn_predict(&m, &[5.0], 3).unwrap();
        assert_eq!(r[0], ("B".to_string(), 1.0));
        assert_eq!(r[1].0, "C");
        assert_eq!(r[2].0, "A");
    }

    #[test]
    fn vote_tie_breaks_on_mean_distance_then_label() {
        let train = [s(&[1.0], "B"), s(&[-3.0], "A"), s(&[2.0], "A"), s(&[-2.5], "B")];
        let m = KnnModel::fit(4, &train).unwrap();
        // two votes each; B mean distance (1 + 2.5)/2 < A mean (3 + 2)/2
        let r = knn_predict(&m, &[0.0], 2).unwrap();
        assert_eq!(r, vec![("B".to_string(), 0.5), ("A".to_string(), 0.5)]);
        let sym = [s(&[1.0], "B"), s(&[-1.0], "A")];
        let m = KnnModel::fit(2, &sym).unwrap();
        assert_eq!(knn_predict(&m, &[0.0], 1).unwrap()[0].0, "A");
    }

    #[test]
    fn errors() {
        assert!(matches!(KnnModel::fit(1, &[]), Err(ClassifyError::EmptyModel)));
        assert!(matches!(KnnModel::fit(3, &[s(&[1.0], "A")]), Err(ClassifyError::KTooLarge { .. })));
        let m = KnnModel::fit(1, &[s(&[1.0], "A")]).unwrap();
        assert!(matches!(m.rank(&[1.0, 2.0]), Err(ClassifyError::DimensionMismatch { .. })));
        assert!(knn_predict(&m, &[1.0], 0).is_err());
    }
}
