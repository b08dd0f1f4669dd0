//! Labeled trace collections, deterministic per-class splits, and the
//! `<root>/<label>/<measurement>.ftrace` directory layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed;
use crate::trace::{self, load_trace, save_trace, FrequencyTrace, TraceError};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("split fractions sum to {0}, expected 1")]
    FractionSum(f64),
    #[error("split fraction {0} is outside [0, 1]")]
    FractionRange(f64),
    #[error("class `{label}` has {have} measurements, split needs at least {need}")]
    TooFewMeasurements { label: String, have: usize, need: usize },
    #[error(
        "trace for `{label}` has {found} samples @{found_interval} ms, dataset uses {expected} @{expected_interval} ms"
    )]
    ShapeMismatch { label: String, expected: usize, expected_interval: u32, found: usize, found_interval: u32 },
    #[error("class sets differ between merged datasets")]
    ClassMismatch,
    #[error("dataset is empty")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub const WEBSITE: SplitFractions = SplitFractions { train: 0.8, val: 0.1, test: 0.1 };
    pub const PASSWORD: SplitFractions = SplitFractions { train: 0.7, val: 0.0, test: 0.3 };

    pub fn validate(&self) -> Result<(), DatasetError> {
        for f in [self.train, self.val, self.test] {
            if !(0.0..=1.0).contains(&f) {
                return Err(DatasetError::FractionRange(f));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::FractionSum(sum));
        }
        Ok(())
    }

    /// (train, val, test) counts for `n` items; val and test are floored and
    /// the remainder goes to train.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let part = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let val = part(self.val);
        let test = part(self.test);
        (n - val - test, val, test)
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions::WEBSITE
    }
}

/// Traces grouped by class label. Every trace shares one interval and one
/// sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub measurements: BTreeMap<String, Vec<FrequencyTrace>>,
    pub split_seed: u64,
    pub split_fractions: SplitFractions,
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: LabeledDataset,
    pub val: LabeledDataset,
    pub test: LabeledDataset,
}

impl LabeledDataset {
    pub fn new(split_seed: u64, split_fractions: SplitFractions) -> Self {
        LabeledDataset { measurements: BTreeMap::new(), split_seed, split_fractions }
    }

    /// Class labels in sort order.
    pub fn classes(&self) -> Vec<String> {
        self.measurements.keys().cloned().collect()
    }

    pub fn num_classes(&self) -> usize {
        self.measurements.len()
    }

    pub fn len(&self) -> usize {
        self.measurements.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// (sample count, interval) shared by all traces.
    pub fn shape(&self) -> Option<(usize, u32)> {
        self.iter().next().map(|(_, t)| (t.len(), t.interval_ms))
    }

    pub fn push(&mut self, label: &str, mut trace: FrequencyTrace) -> Result<(), DatasetError> {
        trace.validate()?;
        if let Some((n, interval)) = self.shape() {
            if trace.len() != n || trace.interval_ms != interval {
                return Err(DatasetError::ShapeMismatch {
                    label: label.to_string(),
                    expected: n,
                    expected_interval: interval,
                    found: trace.len(),
                    found_interval: trace.interval_ms,
                });
            }
        }
        trace.label = Some(label.to_string());
        self.measurements.entry(label.to_string()).or_default().push(trace);
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &FrequencyTrace)> {
        self.measurements.iter().flat_map(|(l, ts)| ts.iter().map(move |t| (l.as_str(), t)))
    }

    /// Applies `f` to every trace, keeping labels and split settings.
    pub fn map_traces<F>(&self, mut f: F) -> Result<LabeledDataset, DatasetError>
    where
        F: FnMut(&FrequencyTrace) -> Result<FrequencyTrace, DatasetError>,
    {
        let mut out = LabeledDataset::new(self.split_seed, self.split_fractions);
        for (label, t) in self.iter() {
            out.push(label, f(t)?)?;
        }
        Ok(out)
    }

    /// Per-class partition into train/val/test. The assignment for a class
    /// is a seeded permutation of its measurement indices keyed by
    /// (split_seed, label), so it does not depend on other classes.
    pub fn split(&self) -> Result<DatasetSplit, DatasetError> {
        self.split_fractions.validate()?;
        if self.is_empty() {
            return Err(DatasetError::Empty);
        }
        let fr = self.split_fractions;
        let need = [fr.train, fr.val, fr.test].iter().filter(|&&f| f > 0.0).count();
        let mut train = LabeledDataset::new(self.split_seed, fr);
        let mut val = LabeledDataset::new(self.split_seed, fr);
        let mut test = LabeledDataset::new(self.split_seed, fr);
        for (label, traces) in &self.measurements {
            let n = traces.len();
            let (n_train, n_val, n_test) = fr.counts(n);
            let starved =
                (fr.train > 0.0 && n_train == 0) || (fr.val > 0.0 && n_val == 0) || (fr.test > 0.0 && n_test == 0);
            if n < need.max(1) || starved {
                return Err(DatasetError::TooFewMeasurements { label: label.clone(), have: n, need: need.max(1) });
            }
            let order = split_permutation(self.split_seed, label, n);
            for (rank, &idx) in order.iter().enumerate() {
                let dst = if rank < n_train {
                    &mut train
                } else if rank < n_train + n_val {
                    &mut val
                } else {
                    &mut test
                };
                dst.measurements.entry(label.clone()).or_default().push(traces[idx].clone());
            }
        }
        Ok(DatasetSplit { train, val, test })
    }

    pub fn save(&self, root: &Path) -> Result<(), DatasetError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| DatasetError::Io { path, source }
        };
        fs::create_dir_all(root).map_err(io(root))?;
        for (label, traces) in &self.measurements {
            let dir = label_dir(root, label);
            fs::create_dir_all(&dir).map_err(io(&dir))?;
            for (i, t) in traces.iter().enumerate() {
                save_trace(t, &dir.join(measurement_file_name(i)))?;
            }
        }
        Ok(())
    }

    /// Loads `<root>/<label>/*.ftrace` into a fixed-shape dataset.
    pub fn load(root: &Path, split_seed: u64, split_fractions: SplitFractions) -> Result<Self, DatasetError> {
        let mut ds = LabeledDataset::new(split_seed, split_fractions);
        for (label, traces) in load_labeled_traces(root)? {
            for t in traces {
                ds.push(&label, t)?;
            }
        }
        Ok(ds)
    }
}

/// Reads `<root>/<label>/*.ftrace` without any shape requirement. The class
/// label comes from each trace's header when present, otherwise from the
/// directory name.
pub fn load_labeled_traces(root: &Path) -> Result<BTreeMap<String, Vec<FrequencyTrace>>, DatasetError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| DatasetError::Io { path, source }
    };
    let mut dirs: Vec<PathBuf> =
        fs::read_dir(root).map_err(io(root))?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    dirs.sort();
    let mut out: BTreeMap<String, Vec<FrequencyTrace>> = BTreeMap::new();
    for dir in dirs {
        let dir_label = dir
            .file_name()
            .map(|n| percent_encoding::percent_decode_str(&n.to_string_lossy()).decode_utf8_lossy().into_owned())
            .unwrap_or_default();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == trace::EXTENSION))
            .collect();
        files.sort();
        for f in files {
            let t = load_trace(&f)?;
            let label = t.label.clone().unwrap_or_else(|| dir_label.clone());
            out.entry(label).or_default().push(t);
        }
    }
    if out.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(out)
}

/// Directory holding the measurements of `label` under a dataset root.
pub fn label_dir(root: &Path, label: &str) -> PathBuf {
    root.join(trace::encode(label).replace('/', "%2F"))
}

pub fn measurement_file_name(index: usize) -> String {
    format!("{index:04}.{}", trace::EXTENSION)
}

fn split_permutation(split_seed: u64, label: &str, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive_str(split_seed, label)));
    order
}

/// Union of several datasets with identical class sets and trace shape.
/// Split settings come from the first dataset.
pub fn merge_datasets(parts: &[LabeledDataset]) -> Result<LabeledDataset, DatasetError> {
    let first = parts.first().ok_or(DatasetError::Empty)?;
    let classes = first.classes();
    let mut out = LabeledDataset::new(first.split_seed, first.split_fractions);
    for ds in parts {
        if ds.classes() != classes {
            return Err(DatasetError::ClassMismatch);
        }
        for (label, t) in ds.iter() {
            out.push(label, t.clone())?;
        }
    }
    Ok(out)
}
