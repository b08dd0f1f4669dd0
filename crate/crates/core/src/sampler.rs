//! Timed sampling of a frequency source into measurements, and the
//! read-resolution (repetitiveness) diagnostic.
//!
//! Per measurement: run the pre-hook (e.g. open a page), take `N_s` readings
//! `T_i` ms apart, run the post-hook (close the browser), then idle for
//! `inter_measurement_sleep_ms`.

use std::collections::BTreeMap;
use std::process::Command;

use thiserror::Error;

use crate::source::{FreqSource, SourceError};
use crate::trace::FrequencyTrace;

/// Environment variables hooks inherit; everything else is dropped.
pub const HOOK_ENV_ALLOWLIST: [&str; 8] =
    ["PATH", "HOME", "USER", "LANG", "LC_ALL", "DISPLAY", "WAYLAND_DISPLAY", "XDG_RUNTIME_DIR"];

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("measurement {measurement}: {hook} hook failed: {reason}")]
    Hook { measurement: usize, hook: &'static str, reason: String },
    #[error("measurement {measurement}: {source}")]
    Source {
        measurement: usize,
        #[source]
        source: SourceError,
    },
}

impl SampleError {
    pub fn is_access_denied(&self) -> bool {
        matches!(self, SampleError::Source { source: SourceError::AccessDenied, .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectPlan {
    pub interval_ms: u32,
    pub samples_per_measurement: usize,
    pub measurements: usize,
    pub label: String,
    pub pre_hook: Option<String>,
    pub post_hook: Option<String>,
    pub inter_measurement_sleep_ms: u64,
}

impl CollectPlan {
    pub fn new(label: impl Into<String>, interval_ms: u32, samples: usize, measurements: usize) -> Self {
        CollectPlan {
            interval_ms,
            samples_per_measurement: samples,
            measurements,
            label: label.into(),
            pre_hook: None,
            post_hook: None,
            inter_measurement_sleep_ms: 1000,
        }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if self.interval_ms == 0 || self.samples_per_measurement == 0 || self.measurements == 0 {
            return Err(SampleError::InvalidPlan(
                "interval_ms, samples_per_measurement and measurements must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn run_hook(cmd: &str, label: &str, measurement: usize, which: &'static str) -> Result<(), SampleError> {
    let mut c = Command::new("sh");
    c.arg("-c").arg(cmd).env_clear();
    for key in HOOK_ENV_ALLOWLIST {
        if let Some(v) = std::env::var_os(key) {
            c.env(key, v);
        }
    }
    c.env("FREQSCOPE_LABEL", label).env("FREQSCOPE_MEASUREMENT", measurement.to_string());
    let hook_err = |reason: String| SampleError::Hook { measurement, hook: which, reason };
    let status = c.status().map_err(|e| hook_err(e.to_string()))?;
    if !status.success() {
        return Err(hook_err(format!("exited with {status}")));
    }
    Ok(())
}

/// Collects `plan.measurements` traces of exactly `plan.samples_per_measurement`
/// readings each.
pub fn collect(plan: &CollectPlan, src: &mut FreqSource) -> Result<Vec<FrequencyTrace>, SampleError> {
    collect_with(plan, src, |_, _| {})
}

/// [`collect`] with a callback invoked after each finished measurement.
pub fn collect_with<F>(
    plan: &CollectPlan,
    src: &mut FreqSource,
    mut on_trace: F,
) -> Result<Vec<FrequencyTrace>, SampleError>
where
    F: FnMut(usize, &FrequencyTrace),
{
    plan.validate()?;
    let mut out = Vec::with_capacity(plan.measurements);
    for m in 0..plan.measurements {
        let source_err = |source| SampleError::Source { measurement: m, source };
        if let Some(cmd) = &plan.pre_hook {
            run_hook(cmd, &plan.label, m, "pre")?;
        }
        let mut samples = Vec::with_capacity(plan.samples_per_measurement);
        for _ in 0..plan.samples_per_measurement {
            samples.push(src.read_freq().map_err(source_err)?);
            src.advance(plan.interval_ms as u64).map_err(source_err)?;
        }
        if let Some(cmd) = &plan.post_hook {
            run_hook(cmd, &plan.label, m, "post")?;
        }
        src.advance(plan.inter_measurement_sleep_ms).map_err(source_err)?;
        let trace = FrequencyTrace {
            samples,
            interval_ms: plan.interval_ms,
            label: Some(plan.label.clone()),
            device: src.device().to_string(),
            start_index: 0,
        };
        on_trace(m, &trace);
        out.push(trace);
    }
    Ok(out)
}

/// Mean length of runs of identical consecutive values. 1.0 means every
/// reading differs from its predecessor.
pub fn mean_run_length(values: &[u32]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let runs = 1 + values.windows(2).filter(|w| w[0] != w[1]).count();
    values.len() as f64 / runs as f64
}

/// For each delay, takes `reads_per_delay` readings spaced by that delay and
/// reports their mean consecutive-repeat run length.
pub fn repetitiveness(
    src: &mut FreqSource,
    delays_ms: &[u64],
    reads_per_delay: usize,
) -> Result<BTreeMap<u64, f64>, SampleError> {
    if delays_ms.is_empty() || reads_per_delay < 2 {
        return Err(SampleError::InvalidPlan("need at least one delay and two reads per delay".into()));
    }
    let mut out = BTreeMap::new();
    for (m, &delay) in delays_ms.iter().enumerate() {
        let source_err = |source| SampleError::Source { measurement: m, source };
        let mut values = Vec::with_capacity(reads_per_delay);
        for _ in 0..reads_per_delay {
            values.push(src.read_freq().map_err(source_err)?);
            src.advance(delay).map_err(source_err)?;
        }
        out.insert(delay, mean_run_length(&values));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::AccessPolicy;

    fn replay(samples: Vec<u32>, interval: u32) -> FreqSource {
        FreqSource::replay(FrequencyTrace::new(samples, interval, "comet_lake").unwrap())
    }

    #[test]
    fn chrome_plan_covers_ten_seconds() {
        let samples: Vec<u32> = (0..1100).map(|i| 400_000 + (i % 40) * 100_000).collect();
        let mut src = replay(samples.clone(), 10);
        let mut plan = CollectPlan::new("example.com", 10, 1000, 1);
        plan.inter_measurement_sleep_ms = 0;
        let traces = collect(&plan, &mut src).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].samples, samples[..1000]);
        assert_eq!(traces[0].duration_ms(), 10_000);
        assert_eq!(src.position(), Some(1000));
    }

    #[test]
    fn tor_plan_covers_thirty_seconds() {
        let mut src = replay(vec![800_000; 4000], 10);
        let plan = CollectPlan::new("onion", 10, 3000, 1);
        let traces = collect(&plan, &mut src).unwrap();
        assert_eq!(traces[0].len(), 3000);
        assert_eq!(traces[0].duration_ms(), 30_000);
    }

    #[test]
    fn masked_source_yields_nothing() {
        let mut src = replay(vec![1; 10], 10).with_policy(AccessPolicy::Masked);
        let err = collect(&CollectPlan::new("x", 10, 5, 2), &mut src).unwrap_err();
        assert!(err.is_access_denied());
    }

    #[test]
    fn hook_failure_aborts() {
        let mut src = replay(vec![1; 100], 10);
        let mut plan = CollectPlan::new("x", 10, 5, 2);
        plan.pre_hook = Some("exit 3".into());
        let err = collect(&plan, &mut src).unwrap_err();
        assert!(matches!(err, SampleError::Hook { measurement: 0, hook: "pre", .. }));
    }

    #[test]
    fn hooks_see_label() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log");
        let mut src = replay(vec![1; 100], 10);
        let mut plan = CollectPlan::new("news", 10, 2, 2);
        plan.inter_measurement_sleep_ms = 0;
        plan.post_hook = Some(format!("echo \"$FREQSCOPE_LABEL $FREQSCOPE_MEASUREMENT\" >> {}", log.display()));
        collect(&plan, &mut src).unwrap();
        assert_eq!(std::fs::read_to_string(log).unwrap(), "news 0\nnews 1\n");
    }

    #[test]
    fn repetitiveness_extremes() {
        let alternating: Vec<u32> = (0..100).map(|i| if i % 2 == 0 { 800_000 } else { 900_000 }).collect();
        let r = repetitiveness(&mut replay(alternating, 10), &[10], 50).unwrap();
        assert_eq!(r[&10], 1.0);
        let r = repetitiveness(&mut replay(vec![5; 100], 10), &[10], 40).unwrap();
        assert_eq!(r[&10], 40.0);
        assert!(repetitiveness(&mut replay(vec![5; 10], 10), &[], 4).is_err());
    }

    #[test]
    fn run_length() {
        assert_eq!(mean_run_length(&[1, 1, 2, 2, 2, 3]), 2.0);
        assert_eq!(mean_run_length(&[1, 2, 3]), 1.0);
    }
}
