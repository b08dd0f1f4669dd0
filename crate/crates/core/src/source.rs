//! Frequency sources: live sysfs, governor simulation, and trace replay
//! behind one reading interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::governor::{step_governor, GovernorError, GovernorState, SimConfig, WorkloadTrace};
use crate::trace::FrequencyTrace;

/// Environment variable overriding the sysfs root (`/sys/devices/system/cpu`).
pub const SYSFS_ROOT_ENV: &str = "FREQSCOPE_SYSFS_ROOT";
pub const DEFAULT_SYSFS_ROOT: &str = "/sys/devices/system/cpu";

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("access to the cpufreq interface is restricted")]
    AccessDenied,
    #[error("reading {path}: {reason}")]
    Sysfs { path: PathBuf, reason: String },
    #[error("replay exhausted after {0} samples")]
    ReplayExhausted(usize),
    #[error(transparent)]
    Governor(#[from] GovernorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccessPolicy {
    #[default]
    Open,
    /// Unprivileged reads of scaling_cur_freq are blocked.
    Masked,
}

/// Path of `scaling_cur_freq` for a policy under `root`.
pub fn policy_path(root: &Path, policy: u32) -> PathBuf {
    root.join("cpufreq").join(format!("policy{policy}")).join("scaling_cur_freq")
}

/// `FREQSCOPE_SYSFS_ROOT` if set, else the real sysfs root.
pub fn sysfs_root() -> PathBuf {
    std::env::var_os(SYSFS_ROOT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_SYSFS_ROOT))
}

#[derive(Debug)]
enum Backend {
    Sysfs {
        path: PathBuf,
        next_deadline: Option<Instant>,
    },
    Sim {
        cfg: Box<SimConfig>,
        workload: WorkloadTrace,
        state: GovernorState,
        /// Index of the last processed tick.
        tick: usize,
        remainder_ms: u64,
    },
    Replay {
        trace: FrequencyTrace,
        cursor: usize,
        remainder_ms: u64,
    },
}

/// A single-owner frequency reader. Virtual backends (sim, replay) keep
/// their own clock; the sysfs backend sleeps toward absolute deadlines.
#[derive(Debug)]
pub struct FreqSource {
    backend: Backend,
    policy: AccessPolicy,
    device: String,
}

impl FreqSource {
    pub fn sysfs(path: impl Into<PathBuf>) -> Self {
        FreqSource {
            backend: Backend::Sysfs { path: path.into(), next_deadline: None },
            policy: AccessPolicy::Open,
            device: "sysfs".into(),
        }
    }

    /// Simulated core. The first workload tick is processed immediately so
    /// a read at time zero matches sample 0 of [`crate::governor::simulate`].
    pub fn sim(cfg: SimConfig, workload: WorkloadTrace) -> Result<Self, SourceError> {
        cfg.validate()?;
        workload.validate()?;
        let state = step_governor(&GovernorState::initial(&cfg), workload.loads[0], workload.tick_ms, &cfg)?;
        Ok(FreqSource {
            device: cfg.profile.name.clone(),
            backend: Backend::Sim { cfg: Box::new(cfg), workload, state, tick: 0, remainder_ms: 0 },
            policy: AccessPolicy::Open,
        })
    }

    pub fn replay(trace: FrequencyTrace) -> Self {
        FreqSource {
            device: trace.device.clone(),
            backend: Backend::Replay { trace, cursor: 0, remainder_ms: 0 },
            policy: AccessPolicy::Open,
        }
    }

    pub fn with_policy(mut self, policy: AccessPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_device(mut self, device: impl Into<String>) -> Self {
        self.device = device.into();
        self
    }

    pub fn policy(&self) -> AccessPolicy {
        self.policy
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    /// Current frequency in kHz. Reads never advance time.
    pub fn read_freq(&mut self) -> Result<u32, SourceError> {
        if self.policy == AccessPolicy::Masked {
            return Err(SourceError::AccessDenied);
        }
        match &mut self.backend {
            Backend::Sysfs { path, next_deadline } => {
                if next_deadline.is_none() {
                    *next_deadline = Some(Instant::now());
                }
                read_sysfs(path)
            }
            Backend::Sim { state, .. } => Ok(state.current_freq_khz),
            Backend::Replay { trace, cursor, .. } => {
                trace.samples.get(*cursor).copied().ok_or(SourceError::ReplayExhausted(trace.len()))
            }
        }
    }

    /// Advances the source clock by `dt_ms`. Sub-interval remainders carry
    /// over exactly to the next call.
    pub fn advance(&mut self, dt_ms: u64) -> Result<(), SourceError> {
        if dt_ms == 0 {
            return Ok(());
        }
        match &mut self.backend {
            Backend::Sysfs { next_deadline, .. } => {
                let deadline = next_deadline.unwrap_or_else(Instant::now) + Duration::from_millis(dt_ms);
                *next_deadline = Some(deadline);
                let now = Instant::now();
                if deadline > now {
                    thread::sleep(deadline - now);
                }
                Ok(())
            }
            Backend::Sim { cfg, workload, state, tick, remainder_ms } => {
                let tick_ms = workload.tick_ms as u64;
                let total = *remainder_ms + dt_ms;
                *remainder_ms = total % tick_ms;
                for _ in 0..total / tick_ms {
                    if *tick + 1 >= workload.len() {
                        break;
                    }
                    *tick += 1;
                    *state = step_governor(state, workload.loads[*tick], workload.tick_ms, cfg)?;
                }
                Ok(())
            }
            Backend::Replay { trace, cursor, remainder_ms } => {
                let interval = trace.interval_ms as u64;
                let total = *remainder_ms + dt_ms;
                *remainder_ms = total % interval;
                let steps = (total / interval) as usize;
                *cursor = (*cursor + steps).min(trace.len());
                Ok(())
            }
        }
    }

    /// Replay cursor or simulated tick index; `None` for sysfs.
    pub fn position(&self) -> Option<usize> {
        match &self.backend {
            Backend::Sysfs { .. } => None,
            Backend::Sim { tick, .. } => Some(*tick),
            Backend::Replay { cursor, .. } => Some(*cursor),
        }
    }
}

fn read_sysfs(path: &Path) -> Result<u32, SourceError> {
    let err = |reason: String| SourceError::Sysfs { path: path.to_path_buf(), reason };
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::PermissionDenied {
            return SourceError::AccessDenied;
        }
        err(e.to_string())
    })?;
    text.trim().parse().map_err(|_| err(format!("not a kHz value: {:?}", text.trim())))
}
