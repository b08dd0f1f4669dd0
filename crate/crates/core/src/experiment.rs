//! Desk-scale experiment drivers shared by the CLI, the benches and the
//! acceptance suite: synthetic website datasets pushed through the governor
//! simulator, and the train/evaluate loop.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{self, ClassifyError, EvalReport, ForestParams, Model, ModelKind, Normalization};
use crate::dataset::{DatasetError, LabeledDataset, SplitFractions};
use crate::governor::{simulate, Governor, GovernorError, SimConfig};
use crate::keystroke::{detect_keystrokes, synth_typing, KeystrokeError, KeystrokeParams, TypingParams};
use crate::profile::{cortex_a73, DeviceProfile};
use crate::seed;
use crate::trace::FrequencyTrace;
use crate::workload::{synth_workload, KeystrokeWorkload, WebsiteParams, WorkloadError, WorkloadKind};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Governor(#[from] GovernorError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Keystroke(#[from] KeystrokeError),
}

pub fn class_label(class: usize) -> String {
    format!("site{class:03}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsiteExperiment {
    pub sim: SimConfig,
    pub classes: usize,
    pub measurements: usize,
    /// Template for every class; `class_id` is overwritten per class.
    pub workload: WebsiteParams,
    pub seed: u64,
    pub split_seed: u64,
    pub split: SplitFractions,
}

impl WebsiteExperiment {
    /// 1000 samples at 10 ms, 80/10/10 split.
    pub fn new(profile: DeviceProfile, governor: Governor, classes: usize, measurements: usize, seed: u64) -> Self {
        let mut sim = SimConfig::new(profile, governor);
        sim.seed = seed;
        WebsiteExperiment {
            sim,
            classes,
            measurements,
            workload: WebsiteParams::default(),
            seed,
            split_seed: seed,
            split: SplitFractions::WEBSITE,
        }
    }

    /// Simulates every (class, measurement) trace.
    pub fn dataset(&self) -> Result<LabeledDataset, ExperimentError> {
        self.sim.validate()?;
        let jobs: Vec<(usize, usize)> =
            (0..self.classes).flat_map(|c| (0..self.measurements).map(move |m| (c, m))).collect();
        let traces = jobs
            .par_iter()
            .map(|&(c, m)| {
                let params = WebsiteParams { class_id: c as u64, ..self.workload.clone() };
                let s = seed::derive(seed::derive(self.seed, c as u64), m as u64);
                let w = synth_workload(&WorkloadKind::Website(params), s)?;
                let mut t = simulate(&w, &self.sim)?;
                t.label = Some(class_label(c));
                Ok((c, t))
            })
            .collect::<Result<Vec<_>, ExperimentError>>()?;
        let mut ds = LabeledDataset::new(self.split_seed, self.split);
        for (c, t) in traces {
            ds.push(&class_label(c), t)?;
        }
        Ok(ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub kind: ModelKind,
    pub k: usize,
    pub forest: ForestParams,
    pub normalization: Normalization,
}

impl ClassifierParams {
    pub fn knn(k: usize) -> Self {
        ClassifierParams {
            kind: ModelKind::Knn,
            k,
            forest: ForestParams::default(),
            normalization: Normalization::None,
        }
    }

    pub fn forest(seed: u64) -> Self {
        ClassifierParams {
            kind: ModelKind::Forest,
            k: 1,
            forest: ForestParams { seed, ..ForestParams::default() },
            normalization: Normalization::None,
        }
    }

    pub fn with_normalization(mut self, n: Normalization) -> Self {
        self.normalization = n;
        self
    }
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams::knn(1)
    }
}

pub fn train(ds: &LabeledDataset, params: &ClassifierParams) -> Result<Model, ExperimentError> {
    let samples = classify::features::dataset_samples(ds, params.normalization)?;
    Ok(Model::train(params.kind, params.k, params.forest, &samples)?)
}

/// Splits `ds`, trains on the train part and reports on the test part.
pub fn train_and_evaluate(
    ds: &LabeledDataset,
    params: &ClassifierParams,
    topk: &[usize],
) -> Result<EvalReport, ExperimentError> {
    let split = ds.split()?;
    let model = train(&split.train, params)?;
    let test = classify::features::dataset_samples(&split.test, params.normalization)?;
    Ok(classify::evaluate(&model, &test, topk)?)
}

/// Inter-press gaps of a synthetic typing schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressSchedule {
    pub presses: usize,
    /// Share of gaps drawn from the close range; close gaps never follow
    /// each other, so at most two presses fuse.
    pub close_fraction: f64,
    pub close_gap_ms: (u64, u64),
    pub gap_ms: (u64, u64),
    pub lead_in_ms: u64,
    pub tail_ms: u64,
}

impl Default for PressSchedule {
    fn default() -> Self {
        PressSchedule {
            presses: 10,
            close_fraction: 0.0,
            close_gap_ms: (100, 200),
            gap_ms: (300, 800),
            lead_in_ms: 400,
            tail_ms: 600,
        }
    }
}

impl PressSchedule {
    /// Press times and the total duration.
    pub fn draw(&self, seed: u64) -> (Vec<u64>, u64) {
        let mut rng = seed::rng(seed);
        let gaps = self.presses.saturating_sub(1);
        let n_close = ((self.close_fraction * gaps as f64).round() as usize).min(gaps.div_ceil(2));
        // choose non-adjacent close slots: pick from a shrunken range then spread
        let picks = rand::seq::index::sample(&mut rng, gaps + 1 - n_close, n_close).into_vec();
        let mut sorted = picks;
        sorted.sort_unstable();
        let close: Vec<usize> = sorted.into_iter().enumerate().map(|(i, p)| p + i).collect();
        let mut t = self.lead_in_ms + rng.gen_range(0..20);
        let mut out = vec![t];
        for g in 0..gaps {
            let (lo, hi) = if close.contains(&g) { self.close_gap_ms } else { self.gap_ms };
            t += rng.gen_range(lo..hi);
            out.push(t);
        }
        (out, t + self.tail_ms)
    }
}

/// Interactive-governor trace of a typing session on the phone profile.
pub fn keystroke_trace(presses: Vec<u64>, duration_ms: u64, seed: u64) -> Result<FrequencyTrace, ExperimentError> {
    let w = synth_workload(&WorkloadKind::Keystrokes(KeystrokeWorkload::new(presses, duration_ms)), seed)?;
    Ok(simulate(&w, &SimConfig::new(cortex_a73(), Governor::Interactive))?)
}

/// Greedy in-order matching of detected to true press times; returns the
/// number of detections within `tolerance_ms` of an unmatched truth.
pub fn match_presses(truth: &[u64], detected: &[u64], tolerance_ms: u64) -> usize {
    let (mut i, mut j, mut hits) = (0, 0, 0);
    while i < truth.len() && j < detected.len() {
        if truth[i].abs_diff(detected[j]) <= tolerance_ms {
            hits += 1;
            i += 1;
            j += 1;
        } else if truth[i] < detected[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    hits
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSummary {
    pub traces: usize,
    pub recall: f64,
    pub precision: f64,
    /// Share of traces whose detected press count is exact.
    pub count_accuracy: f64,
}

/// Simulates `traces` sessions and scores [`detect_keystrokes`] on them.
pub fn keystroke_detection(
    schedule: &PressSchedule,
    params: &KeystrokeParams,
    traces: usize,
    tolerance_ms: u64,
    seed: u64,
) -> Result<DetectionSummary, ExperimentError> {
    let per_trace = (0..traces)
        .into_par_iter()
        .map(|i| {
            let s = seed::derive(seed, i as u64);
            let (presses, duration) = schedule.draw(s);
            let t = keystroke_trace(presses.clone(), duration, seed::derive(s, 1))?;
            let r = detect_keystrokes(&t, params)?;
            let hits = match_presses(&presses, &r.press_times_ms, tolerance_ms);
            Ok((presses.len(), r.presses(), hits))
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let truth: usize = per_trace.iter().map(|x| x.0).sum();
    let found: usize = per_trace.iter().map(|x| x.1).sum();
    let hits: usize = per_trace.iter().map(|x| x.2).sum();
    let exact = per_trace.iter().filter(|x| x.0 == x.1).count();
    Ok(DetectionSummary {
        traces,
        recall: hits as f64 / truth.max(1) as f64,
        precision: hits as f64 / found.max(1) as f64,
        count_accuracy: exact as f64 / traces.max(1) as f64,
    })
}

/// Recovered inter-key timing vectors for `per_label` typing sessions of
/// each password, run through the governor and the detector.
pub fn password_timings(
    passwords: &[String],
    per_label: usize,
    typing: &TypingParams,
    params: &KeystrokeParams,
    seed: u64,
) -> Result<BTreeMap<String, Vec<Vec<f64>>>, ExperimentError> {
    passwords
        .par_iter()
        .map(|pw| {
            let vectors = (0..per_label)
                .map(|m| {
                    let s = seed::derive(seed::derive_str(seed, pw), m as u64);
                    let w = synth_typing(pw, typing, s);
                    let t = keystroke_trace(w.press_times_ms, w.duration_ms, seed::derive(s, 1))?;
                    let r = detect_keystrokes(&t, params)?;
                    Ok(r.inter_key_timings_ms.iter().map(|&x| x as f64).collect())
                })
                .collect::<Result<Vec<_>, ExperimentError>>()?;
            Ok((pw.clone(), vectors))
        })
        .collect()
}
