//! Seeded synthetic CPU-load generators standing in for browser page loads
//! and touch-screen typing.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::governor::WorkloadTrace;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("invalid workload parameters: {0}")]
    InvalidParams(String),
    #[error("press time {0} ms outside the trace duration of {1} ms")]
    PressOutOfRange(u64, u64),
}

/// Page-load signature. `class_id` fixes the burst skeleton; the seed
/// passed to [`synth_workload`] drives the start offset and the additive
/// jitter of one measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WebsiteParams {
    pub class_id: u64,
    pub ticks: usize,
    pub tick_ms: u32,
    /// Standard deviation of the per-tick additive load jitter.
    pub jitter: f64,
    /// Each burst starts up to this many ticks late, independently per
    /// measurement.
    pub timing_jitter_ticks: usize,
    pub baseline: f64,
    pub min_bursts: usize,
    pub max_bursts: usize,
    pub min_burst_ticks: usize,
    pub max_burst_ticks: usize,
}

impl Default for WebsiteParams {
    fn default() -> Self {
        WebsiteParams {
            class_id: 0,
            ticks: 1000,
            tick_ms: 10,
            jitter: 0.5,
            timing_jitter_ticks: 5,
            baseline: 0.05,
            min_bursts: 20,
            max_bursts: 40,
            min_burst_ticks: 2,
            max_burst_ticks: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub start: usize,
    pub width: usize,
    pub height: f64,
}

impl WebsiteParams {
    /// The class skeleton: identical for every measurement of a class.
    pub fn skeleton(&self) -> Vec<Burst> {
        let mut rng = seed::rng(seed::derive(0x005E_ED0F_5173, self.class_id));
        let n = rng.gen_range(self.min_bursts..=self.max_bursts);
        (0..n)
            .map(|_| Burst {
                start: rng.gen_range(0..self.ticks),
                width: rng.gen_range(self.min_burst_ticks..=self.max_burst_ticks),
                height: rng.gen_range(0.3..1.0),
            })
            .collect()
    }

    fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |m: &str| Err(WorkloadError::InvalidParams(m.to_string()));
        if self.ticks == 0 || self.tick_ms == 0 {
            return bad("ticks and tick_ms must be positive");
        }
        if self.min_bursts > self.max_bursts || self.min_burst_ticks > self.max_burst_ticks || self.min_burst_ticks == 0
        {
            return bad("burst ranges must be non-empty");
        }
        if !(0.0..=1.0).contains(&self.baseline) || !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad("baseline must lie in [0, 1] and jitter must be >= 0");
        }
        Ok(())
    }
}

/// Typing session: a short load pulse at each press.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeWorkload {
    pub press_times_ms: Vec<u64>,
    pub duration_ms: u64,
    pub tick_ms: u32,
    /// Pulse width range; at 20 ms ticks with an 80 ms boost hold this
    /// yields 8 to 12 elevated frequency samples per press.
    pub min_pulse_ms: u32,
    pub max_pulse_ms: u32,
    pub min_pulse_load: f64,
    pub max_pulse_load: f64,
    pub idle_amplitude: f64,
}

impl KeystrokeWorkload {
    pub fn new(press_times_ms: Vec<u64>, duration_ms: u64) -> Self {
        KeystrokeWorkload {
            press_times_ms,
            duration_ms,
            tick_ms: 20,
            min_pulse_ms: 100,
            max_pulse_ms: 180,
            min_pulse_load: 0.35,
            max_pulse_load: 0.45,
            idle_amplitude: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdleParams {
    pub ticks: usize,
    pub tick_ms: u32,
    /// Upper bound of the uniform idle load, below 0.05.
    pub amplitude: f64,
}

impl Default for IdleParams {
    fn default() -> Self {
        IdleParams { ticks: 1000, tick_ms: 10, amplitude: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub ticks: usize,
    pub tick_ms: u32,
    /// Expected burst starts per second.
    pub burst_rate_hz: f64,
    pub max_burst_ticks: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { ticks: 1000, tick_ms: 10, burst_rate_hz: 10.0, max_burst_ticks: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WorkloadKind {
    Website(WebsiteParams),
    Keystrokes(KeystrokeWorkload),
    Idle(IdleParams),
    Noise(NoiseParams),
}

pub fn synth_workload(kind: &WorkloadKind, seed: u64) -> Result<WorkloadTrace, WorkloadError> {
    let mut rng = seed::rng(seed);
    let (loads, tick_ms) = match kind {
        WorkloadKind::Website(p) => {
            p.validate()?;
            let mut loads = vec![p.baseline; p.ticks];
            for b in p.skeleton() {
                let shift = rng.gen_range(0..=p.timing_jitter_ticks);
                for l in loads.iter_mut().skip(b.start + shift).take(b.width) {
                    *l = l.max(b.height);
                }
            }
            if p.jitter > 0.0 {
                let noise = Normal::new(0.0, p.jitter).unwrap();
                for l in loads.iter_mut() {
                    *l = (*l + noise.sample(&mut rng)).clamp(0.0, 1.0);
                }
            }
            (loads, p.tick_ms)
        }
        WorkloadKind::Keystrokes(k) => {
            if k.tick_ms == 0 || k.duration_ms < k.tick_ms as u64 {
                return Err(WorkloadError::InvalidParams("duration must cover at least one tick".into()));
            }
            if k.min_pulse_ms > k.max_pulse_ms || k.min_pulse_ms < k.tick_ms {
                return Err(WorkloadError::InvalidParams("pulse width range".into()));
            }
            if !(0.0 < k.min_pulse_load && k.min_pulse_load <= k.max_pulse_load && k.max_pulse_load <= 1.0) {
                return Err(WorkloadError::InvalidParams("pulse load range".into()));
            }
            let ticks = (k.duration_ms / k.tick_ms as u64) as usize;
            let mut loads: Vec<f64> = (0..ticks).map(|_| rng.gen_range(0.0..=k.idle_amplitude)).collect();
            let tick = k.tick_ms as u64;
            for &press in &k.press_times_ms {
                if press >= k.duration_ms {
                    return Err(WorkloadError::PressOutOfRange(press, k.duration_ms));
                }
                let width_ticks = rng.gen_range(k.min_pulse_ms as u64 / tick..=k.max_pulse_ms as u64 / tick) as usize;
                let height = rng.gen_range(k.min_pulse_load..=k.max_pulse_load);
                let start = (press / tick) as usize;
                for l in loads.iter_mut().skip(start).take(width_ticks) {
                    *l = l.max(height);
                }
            }
            (loads, k.tick_ms)
        }
        WorkloadKind::Idle(p) => {
            if !(0.0..0.05).contains(&p.amplitude) || p.ticks == 0 {
                return Err(WorkloadError::InvalidParams("idle amplitude must lie in [0, 0.05)".into()));
            }
            ((0..p.ticks).map(|_| rng.gen_range(0.0..=p.amplitude)).collect(), p.tick_ms)
        }
        WorkloadKind::Noise(p) => {
            if p.ticks == 0 || p.tick_ms == 0 || p.burst_rate_hz < 0.0 || p.max_burst_ticks == 0 {
                return Err(WorkloadError::InvalidParams("noise parameters".into()));
            }
            let start_prob = (p.burst_rate_hz * p.tick_ms as f64 / 1000.0).min(1.0);
            let mut loads: Vec<f64> = (0..p.ticks).map(|_| rng.gen_range(0.0..0.05)).collect();
            for i in 0..p.ticks {
                if rng.gen_bool(start_prob) {
                    let w = rng.gen_range(1..=p.max_burst_ticks);
                    let h = rng.gen_range(0.1..=1.0);
                    for l in loads.iter_mut().skip(i).take(w) {
                        *l = l.max(h);
                    }
                }
            }
            (loads, p.tick_ms)
        }
    };
    WorkloadTrace::new(loads, tick_ms).map_err(|e| WorkloadError::InvalidParams(e.to_string()))
}
