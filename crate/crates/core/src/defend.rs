//! Countermeasures against frequency-trace fingerprinting and a harness
//! measuring how much each one costs the attacker.
//!
//! Trace-stage defenses rewrite the readings an unprivileged observer would
//! see. Access restriction has no trace-stage form: it is a property of the
//! frequency source ([`crate::source::AccessPolicy::Masked`]).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::EvalReport;
use crate::dataset::{DatasetError, LabeledDataset};
use crate::experiment::{train_and_evaluate, ClassifierParams, ExperimentError};
use crate::profile::{self, DeviceProfile};
use crate::seed;
use crate::trace::FrequencyTrace;

#[derive(Debug, Error)]
pub enum DefendError {
    #[error("access restriction applies to the frequency source, not to recorded traces")]
    SourceOnly,
    #[error("invalid defense: {0}")]
    Invalid(String),
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

impl From<DatasetError> for DefendError {
    fn from(e: DatasetError) -> Self {
        DefendError::Experiment(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defense {
    /// Expose only every `factor`-th reading, held until the next update.
    ResolutionReduce {
        factor: u32,
    },
    /// Random plateau bursts of background work; `burst_height` is a
    /// fraction of the device's frequency range.
    NoiseInject {
        burst_rate_hz: f64,
        burst_height: f64,
        seed: u64,
    },
    /// Pin the observable frequency to one P-state.
    ConstantMask {
        freq_khz: u32,
    },
    AccessRestrict,
}

impl Defense {
    pub fn name(&self) -> &'static str {
        match self {
            Defense::ResolutionReduce { .. } => "resolution_reduce",
            Defense::NoiseInject { .. } => "noise_inject",
            Defense::ConstantMask { .. } => "constant_mask",
            Defense::AccessRestrict => "access_restrict",
        }
    }

    /// The swept parameter, for reports.
    pub fn param(&self) -> String {
        match self {
            Defense::ResolutionReduce { factor } => factor.to_string(),
            Defense::NoiseInject { burst_rate_hz, .. } => burst_rate_hz.to_string(),
            Defense::ConstantMask { freq_khz } => freq_khz.to_string(),
            Defense::AccessRestrict => "-".into(),
        }
    }

    pub fn validate(&self, profile: &DeviceProfile) -> Result<(), DefendError> {
        match *self {
            Defense::ResolutionReduce { factor } if factor < 2 => {
                Err(DefendError::Invalid(format!("resolution factor {factor} must be >= 2")))
            }
            Defense::NoiseInject { burst_rate_hz, burst_height, .. }
                if !(burst_rate_hz >= 0.0 && burst_rate_hz.is_finite()) || !(0.0..=1.0).contains(&burst_height) =>
            {
                Err(DefendError::Invalid("burst rate must be >= 0 and height within [0, 1]".into()))
            }
            Defense::ConstantMask { freq_khz } if profile.pstate_index(freq_khz).is_none() => {
                Err(DefendError::Invalid(format!("mask frequency {freq_khz} kHz is not a P-state of {}", profile.name)))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Defense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name(), self.param())
    }
}

/// Burst plateau width range in samples.
pub const NOISE_BURST_SAMPLES: (usize, usize) = (3, 8);

fn trace_key(t: &FrequencyTrace) -> u64 {
    let mut bytes = Vec::with_capacity(t.samples.len() * 4 + 32);
    for s in &t.samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    bytes.extend_from_slice(t.label.as_deref().unwrap_or("").as_bytes());
    seed::fnv1a(&bytes)
}

/// Applies a trace-stage defense. Length, interval and metadata are kept.
pub fn apply_defense(d: &Defense, t: &FrequencyTrace, profile: &DeviceProfile) -> Result<FrequencyTrace, DefendError> {
    d.validate(profile)?;
    let mut out = t.clone();
    match *d {
        Defense::AccessRestrict => return Err(DefendError::SourceOnly),
        Defense::ConstantMask { freq_khz } => out.samples.iter_mut().for_each(|s| *s = freq_khz),
        Defense::ResolutionReduce { factor } => {
            let f = factor as usize;
            for (i, s) in out.samples.iter_mut().enumerate() {
                *s = t.samples[i - i % f];
            }
        }
        Defense::NoiseInject { burst_rate_hz, burst_height, seed: s } => {
            let p = (burst_rate_hz * t.interval_ms as f64 / 1000.0).min(1.0);
            if p <= 0.0 || burst_height <= 0.0 {
                return Ok(out);
            }
            let lo = profile.min_freq_khz as f64;
            let hi = profile.effective_max_khz() as f64;
            let lift = burst_height * (hi - lo);
            let mut boost = vec![0.0f64; t.len()];
            let mut rng = seed::rng(seed::derive(s, trace_key(t)));
            for i in 0..t.len() {
                if rng.gen_bool(p) {
                    let w = rng.gen_range(NOISE_BURST_SAMPLES.0..=NOISE_BURST_SAMPLES.1);
                    boost.iter_mut().skip(i).take(w).for_each(|b| *b = lift);
                }
            }
            for (s, b) in out.samples.iter_mut().zip(boost) {
                if b > 0.0 {
                    *s = profile.quantize((*s as f64 + b).clamp(lo, hi));
                }
            }
        }
    }
    Ok(out)
}

fn profile_for(t: &FrequencyTrace) -> Result<DeviceProfile, DefendError> {
    profile::builtin(&t.device).map_err(|_| DefendError::UnknownDevice(t.device.clone()))
}

/// Applies `d` to every trace of the dataset.
pub fn defend_dataset(d: &Defense, ds: &LabeledDataset) -> Result<LabeledDataset, DefendError> {
    let mut err = None;
    let out = ds.map_traces(|t| {
        let applied = profile_for(t).and_then(|p| apply_defense(d, t, &p));
        applied.map_err(|e| {
            err = Some(e);
            DatasetError::Empty
        })
    });
    match (out, err) {
        (_, Some(e)) => Err(e),
        (Ok(ds), None) => Ok(ds),
        (Err(e), None) => Err(e.into()),
    }
}

/// Trains and tests on clean data and on defended data (train and test both
/// defended: the attacker profiles the protected system) with identical
/// split and model seeds.
pub fn evaluate_defense(
    d: &Defense,
    ds: &LabeledDataset,
    params: &ClassifierParams,
) -> Result<(EvalReport, EvalReport), DefendError> {
    let baseline = train_and_evaluate(ds, params, &[5])?;
    let defended = train_and_evaluate(&defend_dataset(d, ds)?, params, &[5])?;
    Ok((baseline, defended))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub defense: String,
    pub param: String,
    pub top1_clean: f64,
    pub top1_defended: f64,
}

/// Evaluates every defense against one clean baseline. A resolution factor
/// of 1 stands for the undefended system.
pub fn sweep(
    defenses: &[Defense],
    ds: &LabeledDataset,
    params: &ClassifierParams,
) -> Result<Vec<SweepRow>, DefendError> {
    let clean = train_and_evaluate(ds, params, &[5])?.top1_accuracy;
    defenses
        .iter()
        .map(|d| {
            let defended = match d {
                Defense::ResolutionReduce { factor: 1 } => clean,
                _ => train_and_evaluate(&defend_dataset(d, ds)?, params, &[5])?.top1_accuracy,
            };
            Ok(SweepRow { defense: d.name().into(), param: d.param(), top1_clean: clean, top1_defended: defended })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("defense,param,top1_clean,top1_defended\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.defense, r.param, r.top1_clean, r.top1_defended));
    }
    out
}

/// Whitespace-separated `x y` series, one block per defense kind.
pub fn sweep_plot_data(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    let mut current = "";
    for r in rows {
        if r.defense != current {
            if !current.is_empty() {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# {}\n# param top1_defended\n", r.defense));
            current = &r.defense;
        }
        out.push_str(&format!("{} {}\n", r.param, r.top1_defended));
    }
    out
}
