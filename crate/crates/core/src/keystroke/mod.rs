//! Touch-screen keystroke recovery from frequency traces.
//!
//! A press on an otherwise idle phone drives the interactive governor to a
//! short plateau between 8 and 12 samples long (at 20 ms) that peaks below
//! 1.6 GHz. Two presses too close to resolve merge into one longer run that
//! never falls below the sustained level. [`detect_keystrokes`] segments a
//! trace with those rules; [`password`] turns the resulting inter-key
//! timings into a password ranking.

pub mod password;

use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::FrequencyTrace;

pub use password::{
    guess_curve, load_password_list, password_gap_means, synth_typing, train_password_model, PasswordModel,
    TypingParams, BUILTIN_PASSWORDS,
};

/// Segmentation threshold sits this far above the idle frequency.
pub const IDLE_HYSTERESIS_KHZ: u32 = 50_000;

#[derive(Debug, Error)]
pub enum KeystrokeError {
    #[error("trace interval {found} ms does not match the expected {expected} ms")]
    IntervalMismatch { expected: u32, found: u32 },
    #[error("invalid keystroke parameters: {0}")]
    InvalidParams(String),
    #[error("label `{label}` has {found} measurements, at least {needed} required")]
    TooFewMeasurements { label: String, found: usize, needed: usize },
    #[error("need at least two passwords")]
    TooFewLabels,
    #[error("max_guesses {0} outside 1..={1}")]
    BadGuessCount(usize, usize),
    #[error(transparent)]
    Classify(#[from] crate::classify::ClassifyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeystrokeParams {
    pub idle_freq_khz: u32,
    pub peak_cap_khz: u32,
    pub sustained_freq_khz: u32,
    pub min_pulse_samples: usize,
    pub max_single_pulse_samples: usize,
    pub decay_ms: u32,
    pub sample_interval_ms: u32,
}

impl Default for KeystrokeParams {
    fn default() -> Self {
        KeystrokeParams {
            idle_freq_khz: 800_000,
            peak_cap_khz: 1_600_000,
            sustained_freq_khz: 1_200_000,
            min_pulse_samples: 8,
            max_single_pulse_samples: 12,
            decay_ms: 200,
            sample_interval_ms: 20,
        }
    }
}

impl KeystrokeParams {
    pub fn validate(&self) -> Result<(), KeystrokeError> {
        let bad = |m: &str| Err(KeystrokeError::InvalidParams(m.into()));
        if self.min_pulse_samples == 0 || self.min_pulse_samples > self.max_single_pulse_samples {
            return bad("need 1 <= min_pulse_samples <= max_single_pulse_samples");
        }
        if !(self.idle_freq_khz < self.sustained_freq_khz && self.sustained_freq_khz < self.peak_cap_khz) {
            return bad("need idle < sustained < peak_cap");
        }
        if self.sample_interval_ms == 0 {
            return bad("sample interval must be positive");
        }
        Ok(())
    }

    pub fn threshold_khz(&self) -> u32 {
        self.idle_freq_khz + IDLE_HYSTERESIS_KHZ
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeystrokeEvent {
    pub start_index: usize,
    pub length_samples: usize,
    pub inferred_count: usize,
    /// Set for runs longer than two single pulses, whose count is a guess.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KeystrokeReport {
    pub events: Vec<KeystrokeEvent>,
    /// Relative to the first sample of the trace.
    pub press_times_ms: Vec<u64>,
    pub inter_key_timings_ms: Vec<u64>,
}

impl KeystrokeReport {
    pub fn presses(&self) -> usize {
        self.press_times_ms.len()
    }

    pub fn to_kv(&self) -> String {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        let mut out = format!("events={}\npresses={}\n", self.events.len(), self.presses());
        for (i, e) in self.events.iter().enumerate() {
            let _ = writeln!(
                out,
                "event.{i}={},{},{}{}",
                e.start_index,
                e.length_samples,
                e.inferred_count,
                if e.extrapolated { ",extrapolated" } else { "" }
            );
        }
        let _ = writeln!(out, "press_times_ms={}", join(&self.press_times_ms));
        let _ = writeln!(out, "inter_key_timings_ms={}", join(&self.inter_key_timings_ms));
        out
    }
}

/// Maximal runs of samples strictly above `threshold`, as (start, len).
fn runs_above(samples: &[u32], threshold: u32) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &s) in samples.iter().enumerate() {
        match (s > threshold, start) {
            (true, None) => start = Some(i),
            (false, Some(b)) => {
                out.push((b, i - b));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push((b, samples.len() - b));
    }
    out
}

/// Classifies one elevated run. Returns the keystroke count (0 = noise)
/// and whether the count was extrapolated.
fn classify_run(run: &[u32], p: &KeystrokeParams) -> (usize, bool) {
    let len = run.len();
    let peak = run.iter().copied().max().unwrap_or(0);
    let max_single = p.max_single_pulse_samples;
    if len < p.min_pulse_samples {
        (0, false)
    } else if len <= max_single {
        ((peak <= p.peak_cap_khz) as usize, false)
    } else if run.iter().any(|&s| s < p.sustained_freq_khz) {
        (0, false)
    } else if len <= 2 * max_single {
        (2, false)
    } else {
        (len.div_ceil(max_single), true)
    }
}

pub fn detect_keystrokes(trace: &FrequencyTrace, p: &KeystrokeParams) -> Result<KeystrokeReport, KeystrokeError> {
    p.validate()?;
    if trace.interval_ms != p.sample_interval_ms {
        return Err(KeystrokeError::IntervalMismatch { expected: p.sample_interval_ms, found: trace.interval_ms });
    }
    let dt = p.sample_interval_ms as u64;
    let mut report = KeystrokeReport::default();
    for (start, len) in runs_above(&trace.samples, p.threshold_khz()) {
        let (count, extrapolated) = classify_run(&trace.samples[start..start + len], p);
        if count == 0 {
            continue;
        }
        report.events.push(KeystrokeEvent {
            start_index: start,
            length_samples: len,
            inferred_count: count,
            extrapolated,
        });
        // presses split the run evenly; for two that is the midpoint
        for j in 0..count {
            report.press_times_ms.push((start + j * len / count) as u64 * dt);
        }
    }
    report.inter_key_timings_ms = timings(&report);
    Ok(report)
}

/// Consecutive press-time differences; empty with fewer than two presses.
pub fn timings(report: &KeystrokeReport) -> Vec<u64> {
    report.press_times_ms.windows(2).map(|w| w[1] - w[0]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::governor::{simulate, Governor, SimConfig};
    use crate::profile::cortex_a73;
    use crate::workload::{synth_workload, KeystrokeWorkload, WorkloadKind};
    use proptest::prelude::*;

    fn trace(samples: Vec<u32>) -> FrequencyTrace {
        FrequencyTrace::new(samples, 20, "cortex_a73").unwrap()
    }

    fn with_run(total: usize, start: usize, run: &[u32]) -> FrequencyTrace {
        let mut s = vec![806_000; total];
        s[start..start + run.len()].copy_from_slice(run);
        trace(s)
    }

    fn pipeline(presses: Vec<u64>, duration: u64, seed: u64) -> FrequencyTrace {
        let w = synth_workload(&WorkloadKind::Keystrokes(KeystrokeWorkload::new(presses, duration)), seed).unwrap();
        simulate(&w, &SimConfig::new(cortex_a73(), Governor::Interactive)).unwrap()
    }

    #[test]
    fn flat_trace_has_no_keystrokes() {
        let r = detect_keystrokes(&trace(vec![800_000; 200]), &KeystrokeParams::default()).unwrap();
        assert_eq!(r, KeystrokeReport::default());
    }

    #[test]
    fn single_pulse() {
        let mut run = vec![1_600_000; 6];
        run.extend([1_400_000, 1_200_000, 1_000_000, 900_000]);
        let r = detect_keystrokes(&with_run(100, 30, &run), &KeystrokeParams::default()).unwrap();
        assert_eq!(
            r.events,
            vec![KeystrokeEvent { start_index: 30, length_samples: 10, inferred_count: 1, extrapolated: false }]
        );
        assert_eq!(r.press_times_ms, vec![600]);
    }

    #[test]
    fn sustained_long_run_is_two_presses() {
        let r = detect_keystrokes(&with_run(100, 10, &[1_300_000; 14]), &KeystrokeParams::default()).unwrap();
        assert_eq!(r.presses(), 2);
        // same length but sagging below the sustained level is noise
        let mut run = vec![1_300_000; 14];
        run[7] = 1_000_000;
        assert_eq!(detect_keystrokes(&with_run(100, 10, &run), &KeystrokeParams::default()).unwrap().presses(), 0);
    }

    #[test]
    fn double_event_splits_at_midpoint() {
        let r = detect_keystrokes(&with_run(200, 100, &[1_300_000; 16]), &KeystrokeParams::default()).unwrap();
        assert_eq!(r.press_times_ms, vec![2000, 2160]);
        assert_eq!(r.inter_key_timings_ms, vec![160]);
    }

    #[test]
    fn short_and_overpeaked_runs_are_noise() {
        let p = KeystrokeParams::default();
        assert_eq!(detect_keystrokes(&with_run(100, 10, &[1_400_000; 7]), &p).unwrap().presses(), 0);
        assert_eq!(detect_keystrokes(&with_run(100, 10, &[2_000_000; 10]), &p).unwrap().presses(), 0);
    }

    #[test]
    fn very_long_runs_are_extrapolated() {
        let r = detect_keystrokes(&with_run(100, 10, &[1_300_000; 30]), &KeystrokeParams::default()).unwrap();
        assert_eq!(r.events[0].inferred_count, 3);
        assert!(r.events[0].extrapolated);
        assert_eq!(r.press_times_ms, vec![200, 400, 600]);
    }

    #[test]
    fn timings_arithmetic() {
        let r = KeystrokeReport { press_times_ms: vec![1000, 1300, 1900], ..Default::default() };
        assert_eq!(timings(&r), vec![300, 600]);
        let one = KeystrokeReport { press_times_ms: vec![1000], ..Default::default() };
        assert!(timings(&one).is_empty());
    }

    #[test]
    fn interval_mismatch() {
        let t = FrequencyTrace::new(vec![800_000; 10], 10, "cortex_a73").unwrap();
        assert!(matches!(
            detect_keystrokes(&t, &KeystrokeParams::default()),
            Err(KeystrokeError::IntervalMismatch { expected: 20, found: 10 })
        ));
    }

    #[test]
    fn simulated_presses_recovered() {
        // a 400 ms gap leaves the governor time to fall back to idle, so all
        // three presses come out as single events
        let r = detect_keystrokes(&pipeline(vec![1000, 1400, 3000], 4000, 5), &KeystrokeParams::default()).unwrap();
        assert_eq!(r.press_times_ms, vec![1000, 1400, 3000]);
        assert!(r.events.iter().all(|e| e.inferred_count == 1));
    }

    #[test]
    fn close_presses_fuse_and_split() {
        let r = detect_keystrokes(&pipeline(vec![1000, 1140, 3000], 4000, 5), &KeystrokeParams::default()).unwrap();
        assert_eq!(r.presses(), 3);
        assert_eq!(r.events[0].inferred_count, 2);
        assert_eq!(r.press_times_ms[0], 1000);
        assert!(r.press_times_ms[1].abs_diff(1140) <= 60, "{:?}", r.press_times_ms);
    }

    proptest! {
        #[test]
        fn joint_offset_preserves_detection(seed in 0u64..500, offset in -50_000i64..=50_000) {
            let t = pipeline(vec![400, 1000, 1700, 2100], 3000, seed);
            let p = KeystrokeParams::default();
            let shift = |f: u32| (f as i64 + offset) as u32;
            let moved = trace(t.samples.iter().map(|&s| shift(s)).collect());
            let q = KeystrokeParams {
                idle_freq_khz: shift(p.idle_freq_khz),
                peak_cap_khz: shift(p.peak_cap_khz),
                sustained_freq_khz: shift(p.sustained_freq_khz),
                ..p
            };
            prop_assert_eq!(detect_keystrokes(&t, &p).unwrap(), detect_keystrokes(&moved, &q).unwrap());
        }

        #[test]
        fn small_trace_offset_preserves_count(seed in 0u64..500, offset in -25_000i64..=25_000) {
            // below the smallest margin between simulated levels and thresholds
            let t = pipeline(vec![400, 1000, 1700, 2100], 3000, seed);
            let moved = trace(t.samples.iter().map(|&s| (s as i64 + offset) as u32).collect());
            let p = KeystrokeParams::default();
            prop_assert_eq!(detect_keystrokes(&moved, &p).unwrap().presses(), 4);
            prop_assert_eq!(detect_keystrokes(&t, &p).unwrap().presses(), 4);
        }
    }
}
