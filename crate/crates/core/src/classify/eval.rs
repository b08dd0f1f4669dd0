//! Top-k accuracy, confusion matrices, and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassifyError, Ranker, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Row/column order of `confusion`.
    pub labels: Vec<String>,
    pub total: usize,
    pub top1_accuracy: f64,
    pub topk_accuracy: BTreeMap<usize, f64>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub per_class_accuracy: BTreeMap<String, f64>,
}

impl EvalReport {
    /// Builds a report from (true label, ranked labels) pairs.
    pub fn from_rankings(results: &[(String, Vec<String>)], topk: &[usize]) -> Result<Self, ClassifyError> {
        if results.is_empty() {
            return Err(ClassifyError::EmptyTestSet);
        }
        let labels: Vec<String> = results
            .iter()
            .flat_map(|(t, r)| std::iter::once(t).chain(r.first()))
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let pos = |l: &str| labels.binary_search_by(|x| x.as_str().cmp(l)).unwrap();
        let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
        let mut ks: Vec<usize> = topk.iter().copied().filter(|&k| k > 0).collect();
        ks.push(1);
        ks.sort_unstable();
        ks.dedup();
        let mut hits: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
        for (truth, ranking) in results {
            if let Some(pred) = ranking.first() {
                confusion[pos(truth)][pos(pred)] += 1;
            }
            let rank = ranking.iter().position(|l| l == truth);
            for (&k, h) in hits.iter_mut() {
                if rank.is_some_and(|r| r < k) {
                    *h += 1;
                }
            }
        }
        let total = results.len();
        let topk_accuracy: BTreeMap<usize, f64> = hits.into_iter().map(|(k, h)| (k, h as f64 / total as f64)).collect();
        let per_class_accuracy = labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                let row: usize = confusion[i].iter().sum();
                (row > 0).then(|| (l.clone(), confusion[i][i] as f64 / row as f64))
            })
            .collect();
        Ok(EvalReport { top1_accuracy: topk_accuracy[&1], labels, total, topk_accuracy, confusion, per_class_accuracy })
    }

    pub fn topk(&self, k: usize) -> Option<f64> {
        self.topk_accuracy.get(&k).copied()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "test samples   {}", self.total);
        for (k, acc) in &self.topk_accuracy {
            let _ = writeln!(out, "top-{k:<2}         {:>6.2}%", acc * 100.0);
        }
        let width = self.labels.iter().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(out, "\n{:<width$}  accuracy", "class");
        for (l, acc) in &self.per_class_accuracy {
            let _ = writeln!(out, "{l:<width$}  {:>7.2}%", acc * 100.0);
        }
        out
    }

    /// `key=value` lines for scripts.
    pub fn to_kv(&self) -> String {
        let mut out = format!("samples={}\ntop1={}\n", self.total, self.top1_accuracy);
        for (k, acc) in &self.topk_accuracy {
            let _ = writeln!(out, "top{k}={acc}");
        }
        for (l, acc) in &self.per_class_accuracy {
            let _ = writeln!(out, "class.{}={acc}", crate::trace::encode(l));
        }
        out
    }

    pub fn confusion_csv(&self) -> String {
        let esc = |s: &str| {
            if s.contains([',', '"', '\n']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(&esc(l));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            out.push_str(&esc(l));
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

/// Ranks every test sample and scores the rankings.
pub fn evaluate<R: Ranker + ?Sized>(model: &R, test: &[Sample], topk: &[usize]) -> Result<EvalReport, ClassifyError> {
    if test.is_empty() {
        return Err(ClassifyError::EmptyTestSet);
    }
    let results: Vec<(String, Vec<String>)> = test
        .par_iter()
        .map(|(x, truth)| {
            let ranking = model.rank(x)?.into_iter().map(|(l, _)| l).collect();
            Ok((truth.clone(), ranking))
        })
        .collect::<Result<_, ClassifyError>>()?;
    EvalReport::from_rankings(&results, topk)
}
