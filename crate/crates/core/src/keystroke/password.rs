//! Password recovery from inter-key timings, plus a synthetic typist.
//!
//! Timing vectors of different lengths share one KNN by zero-padding to the
//! longest vector seen in training, so length itself is part of the signal.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::KeystrokeError;
use crate::classify::{KnnModel, Model, Normalization, Ranker, Sample, TrainedModel};
use crate::seed;
use crate::workload::KeystrokeWorkload;

/// Synthetic placeholder targets, one per line.
pub const BUILTIN_PASSWORDS: &str = include_str!("../../data/passwords.txt");

pub const PASSWORD_K: usize = 4;
pub const MEASUREMENTS_PER_LABEL: usize = 10;
pub const TRAIN_PER_LABEL: usize = 7;

/// Non-empty lines not starting with `#`.
pub fn load_password_list(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect()
}

/// Key centre on a QWERTY touch keyboard, in key widths.
fn key_position(c: char) -> (f64, f64) {
    const ROWS: [(&str, f64); 4] = [("1234567890", 0.0), ("qwertyuiop", 0.5), ("asdfghjkl", 0.75), ("zxcvbnm", 1.25)];
    let c = c.to_ascii_lowercase();
    for (row, (keys, offset)) in ROWS.iter().enumerate() {
        if let Some(col) = keys.find(c) {
            return (col as f64 + offset, row as f64);
        }
    }
    // symbols sit on a secondary layer; model them as a far reach
    (4.5, 5.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypingParams {
    pub base_gap_ms: f64,
    /// Extra time per key width of finger travel.
    pub per_key_ms: f64,
    /// Half-width of the typist's fixed per-bigram habit offset.
    pub bigram_spread_ms: f64,
    pub sigma_ms: f64,
    pub min_gap_ms: f64,
    pub lead_in_ms: u64,
    pub tail_ms: u64,
}

impl Default for TypingParams {
    fn default() -> Self {
        TypingParams {
            base_gap_ms: 200.0,
            per_key_ms: 40.0,
            bigram_spread_ms: 60.0,
            sigma_ms: 30.0,
            min_gap_ms: 100.0,
            lead_in_ms: 500,
            tail_ms: 600,
        }
    }
}

/// Mean gap before each key after the first.
pub fn password_gap_means(password: &str, p: &TypingParams) -> Vec<f64> {
    let chars: Vec<char> = password.chars().collect();
    chars
        .windows(2)
        .map(|w| {
            let (a, b) = (key_position(w[0]), key_position(w[1]));
            let dist = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            let habit = seed::derive_str(0xB16_7A3, &format!("{}{}", w[0], w[1]));
            let unit = (habit >> 11) as f64 / (1u64 << 53) as f64;
            p.base_gap_ms + p.per_key_ms * dist + p.bigram_spread_ms * (2.0 * unit - 1.0)
        })
        .collect()
}

/// One typing session of `password` as a keystroke workload.
pub fn synth_typing(password: &str, p: &TypingParams, seed: u64) -> KeystrokeWorkload {
    let mut rng = seed::rng(seed);
    let mut t = p.lead_in_ms;
    let mut presses = vec![t];
    for mean in password_gap_means(password, p) {
        let gap = Normal::new(mean, p.sigma_ms).unwrap().sample(&mut rng).max(p.min_gap_ms);
        t += gap.round() as u64;
        presses.push(t);
    }
    // jitter the lead-in so sessions are not phase-locked to the sampler
    let lead: u64 = rng.gen_range(0..20);
    let presses: Vec<u64> = presses.into_iter().map(|x| x + lead).collect();
    let duration = presses.last().copied().unwrap_or(0) + p.tail_ms;
    KeystrokeWorkload::new(presses, duration)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PasswordModel {
    pub knn: KnnModel,
    pub password_labels: Vec<String>,
    /// Every timing vector is zero-padded (or truncated) to this length.
    pub timing_length: usize,
}

fn pad(v: &[f64], len: usize) -> Vec<f64> {
    let mut out: Vec<f64> = v.iter().copied().take(len).collect();
    out.resize(len, 0.0);
    out
}

impl PasswordModel {
    pub fn features(&self, timings: &[f64]) -> Vec<f64> {
        pad(timings, self.timing_length)
    }

    /// Every password, most likely first.
    pub fn rank(&self, timings: &[f64]) -> Result<Vec<(String, f64)>, KeystrokeError> {
        Ok(self.knn.rank(&self.features(timings))?)
    }

    pub fn to_trained(&self) -> TrainedModel {
        let mut tm = TrainedModel::new(Model::Knn(self.knn.clone()), Normalization::None);
        tm.metadata.insert("kind".into(), "password".into());
        tm.metadata.insert("timing_length".into(), self.timing_length.to_string());
        tm
    }

    pub fn from_trained(tm: &TrainedModel) -> Result<Self, KeystrokeError> {
        let bad = || KeystrokeError::InvalidParams("not a password model".into());
        let Model::Knn(knn) = &tm.model else { return Err(bad()) };
        let timing_length = tm.metadata.get("timing_length").and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        Ok(PasswordModel { password_labels: knn.classes().to_vec(), knn: knn.clone(), timing_length })
    }
}

/// Subsamples exactly ten measurements per password, splits them 7/3 and
/// fits a 4-NN model on the seven. Returns the model and the held-out
/// (padded) test vectors.
pub fn train_password_model(
    ds: &BTreeMap<String, Vec<Vec<f64>>>,
    split_seed: u64,
) -> Result<(PasswordModel, Vec<Sample>), KeystrokeError> {
    if ds.len() < 2 {
        return Err(KeystrokeError::TooFewLabels);
    }
    let timing_length = ds.values().flatten().map(Vec::len).max().unwrap_or(0);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, vectors) in ds {
        if vectors.len() < MEASUREMENTS_PER_LABEL {
            return Err(KeystrokeError::TooFewMeasurements {
                label: label.clone(),
                found: vectors.len(),
                needed: MEASUREMENTS_PER_LABEL,
            });
        }
        let mut rng = seed::rng(seed::derive_str(split_seed, label));
        // a random sample of ten in random order: the first seven train
        let picked = index::sample(&mut rng, vectors.len(), MEASUREMENTS_PER_LABEL);
        for (i, v) in picked.into_iter().enumerate() {
            let sample = (pad(&vectors[v], timing_length), label.clone());
            if i < TRAIN_PER_LABEL {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    let knn = KnnModel::fit(PASSWORD_K, &train)?;
    Ok((PasswordModel { password_labels: ds.keys().cloned().collect(), knn, timing_length }, test))
}

/// Entry `g - 1` is the fraction of test vectors whose password is among
/// the model's first `g` guesses.
pub fn guess_curve(model: &PasswordModel, test: &[Sample], max_guesses: usize) -> Result<Vec<f64>, KeystrokeError> {
    let n_labels = model.password_labels.len();
    if max_guesses == 0 || max_guesses > n_labels {
        return Err(KeystrokeError::BadGuessCount(max_guesses, n_labels));
    }
    if test.is_empty() {
        return Err(crate::classify::ClassifyError::EmptyTestSet.into());
    }
    let mut hits = vec![0usize; max_guesses];
    for (x, truth) in test {
        let ranking = model.rank(x)?;
        if let Some(r) = ranking.iter().position(|(l, _)| l == truth) {
            hits.iter_mut().skip(r).for_each(|h| *h += 1);
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / test.len() as f64).collect())
}
