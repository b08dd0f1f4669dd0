//! Per-tick simulation of the Linux CPUFreq scaling governors with a
//! budgeted turbo overlay.
//!
//! A [`WorkloadTrace`] gives the fraction of non-idle time for each tick.
//! [`step_governor`] advances a [`GovernorState`] by one tick and
//! [`simulate`] folds a whole workload into a [`FrequencyTrace`]. Every
//! frequency the simulator emits is a P-state of the profile.
//!
//! Selection laws (all targets quantized to the nearest P-state, midpoint
//! rounds up; `top` is the turbo ceiling when turbo is enabled, otherwise
//! `max_freq`):
//!
//! * performance: `top`
//! * powersave: `min_freq`; on `intel_pstate` the driver runs its own
//!   load-proportional algorithm, approximated by the ondemand law
//! * userspace: `scaling_setspeed`; with turbo enabled and a set speed at
//!   or above base, hardware boost lifts it by `load * (top - setspeed)`
//! * ondemand: `min + load * (top - min)`
//! * conservative: one P-state per tick toward the ondemand target
//! * interactive: ondemand law with a `hispeed_freq` floor for
//!   `boostpulse_duration_ms` after any tick with `load >= load_trigger`;
//!   any change waits `min_sample_time_ms` since the previous one
//! * schedutil: `min + 1.25 * util * (top - min)` where `util` is a PELT
//!   average with a 32 ms half-life
//!
//! Turbo: any non-pinned frequency above the base P-state costs budget per
//! tick; with an exhausted budget the request is clamped to the base
//! P-state. Ticks with `load < 0.1` refill the budget.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{DeviceProfile, ScalingDriver};
use crate::trace::FrequencyTrace;

/// Load below which a tick counts as idle for turbo budget recovery.
pub const TURBO_IDLE_LOAD: f64 = 0.1;
/// PELT half-life.
pub const PELT_HALFLIFE_MS: f64 = 32.0;
/// schedutil frequency headroom multiplier.
pub const SCHEDUTIL_HEADROOM: f64 = 1.25;

#[derive(Debug, Error, PartialEq)]
pub enum GovernorError {
    #[error("unknown governor `{0}`")]
    UnknownGovernor(String),
    #[error("userspace governor requires scaling_setspeed")]
    SetSpeedUnset,
    #[error("scaling_setspeed {0} kHz is outside the profile's range")]
    SetSpeedOutOfRange(u32),
    #[error("governor {governor} is not available with the {driver} driver of {profile}")]
    Unsupported { governor: Governor, driver: &'static str, profile: String },
    #[error("load {0} outside [0, 1]")]
    LoadOutOfRange(f64),
    #[error("invalid workload: {0}")]
    InvalidWorkload(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Governor {
    Performance,
    Powersave,
    Userspace,
    Ondemand,
    Conservative,
    Interactive,
    Schedutil,
}

impl Governor {
    pub const ALL: [Governor; 7] = [
        Governor::Performance,
        Governor::Powersave,
        Governor::Userspace,
        Governor::Ondemand,
        Governor::Conservative,
        Governor::Interactive,
        Governor::Schedutil,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Governor::Performance => "performance",
            Governor::Powersave => "powersave",
            Governor::Userspace => "userspace",
            Governor::Ondemand => "ondemand",
            Governor::Conservative => "conservative",
            Governor::Interactive => "interactive",
            Governor::Schedutil => "schedutil",
        }
    }

    /// Governors the driver exposes in `scaling_available_governors`.
    pub fn available_for(driver: ScalingDriver) -> &'static [Governor] {
        use Governor::*;
        match driver {
            ScalingDriver::IntelPstate => &[Performance, Powersave],
            ScalingDriver::AcpiCpufreq => &[Ondemand, Powersave, Performance, Userspace, Conservative, Schedutil],
            ScalingDriver::Msm => &[Interactive, Ondemand, Powersave, Performance, Userspace, Conservative],
        }
    }
}

impl fmt::Display for Governor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Governor {
    type Err = GovernorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Governor::ALL
            .iter()
            .copied()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| GovernorError::UnknownGovernor(s.to_string()))
    }
}

/// Per-tick CPU load, each value the fraction of non-idle time in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    pub loads: Vec<f64>,
    pub tick_ms: u32,
}

impl WorkloadTrace {
    pub fn new(loads: Vec<f64>, tick_ms: u32) -> Result<Self, GovernorError> {
        let w = WorkloadTrace { loads, tick_ms };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), GovernorError> {
        if self.loads.is_empty() {
            return Err(GovernorError::InvalidWorkload("no ticks".into()));
        }
        if self.tick_ms == 0 {
            return Err(GovernorError::InvalidWorkload("tick_ms must be >= 1".into()));
        }
        if let Some(&bad) = self.loads.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(GovernorError::LoadOutOfRange(bad));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.loads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loads.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractiveParams {
    pub hispeed_freq_khz: u32,
    pub boostpulse_duration_ms: u32,
    pub min_sample_time_ms: u32,
    pub load_trigger: f64,
}

impl InteractiveParams {
    pub const DEFAULT_BOOSTPULSE_MS: u32 = 80;
    pub const DEFAULT_MIN_SAMPLE_TIME_MS: u32 = 20;
    pub const DEFAULT_LOAD_TRIGGER: f64 = 0.3;
    pub const DEFAULT_HISPEED_KHZ: u32 = 1_200_000;

    /// Defaults with `hispeed_freq` at the lowest P-state not below 1.2 GHz.
    pub fn for_profile(profile: &DeviceProfile) -> Self {
        let idx = profile.pstates.partition_point(|&f| f < Self::DEFAULT_HISPEED_KHZ).min(profile.pstates.len() - 1);
        InteractiveParams {
            hispeed_freq_khz: profile.pstates[idx],
            boostpulse_duration_ms: Self::DEFAULT_BOOSTPULSE_MS,
            min_sample_time_ms: Self::DEFAULT_MIN_SAMPLE_TIME_MS,
            load_trigger: Self::DEFAULT_LOAD_TRIGGER,
        }
    }
}

/// Leaky-bucket thermal budget gating frequencies above base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurboParams {
    pub enabled: bool,
    pub ceiling_khz: u32,
    pub budget_gain_per_idle_tick: f64,
    pub budget_cost_per_boost_tick: f64,
}

impl TurboParams {
    pub fn for_profile(profile: &DeviceProfile) -> Self {
        TurboParams {
            enabled: profile.turbo_boost && profile.base_freq_khz.is_some(),
            ceiling_khz: profile.effective_max_khz(),
            budget_gain_per_idle_tick: 0.02,
            budget_cost_per_boost_tick: 0.01,
        }
    }

    pub fn disabled(profile: &DeviceProfile) -> Self {
        TurboParams { enabled: false, ..Self::for_profile(profile) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub profile: DeviceProfile,
    pub governor: Governor,
    pub interactive: InteractiveParams,
    pub conservative_step_khz: u32,
    pub turbo: TurboParams,
    pub set_speed_khz: Option<u32>,
    /// Skip the driver's governor availability check.
    pub allow_any_governor: bool,
    /// Recorded with every run; the selection laws themselves are
    /// deterministic and draw no randomness.
    pub seed: u64,
}

impl SimConfig {
    pub fn new(profile: DeviceProfile, governor: Governor) -> Self {
        SimConfig {
            interactive: InteractiveParams::for_profile(&profile),
            turbo: TurboParams::for_profile(&profile),
            conservative_step_khz: 100_000,
            set_speed_khz: None,
            allow_any_governor: false,
            seed: 0,
            governor,
            profile,
        }
    }

    /// Profile defaults with its default governor.
    pub fn for_profile(profile: DeviceProfile) -> Result<Self, GovernorError> {
        let g: Governor = profile.default_governor.parse()?;
        Ok(SimConfig::new(profile, g))
    }

    pub fn with_set_speed(mut self, khz: u32) -> Self {
        self.set_speed_khz = Some(khz);
        self
    }

    pub fn validate(&self) -> Result<(), GovernorError> {
        let p = &self.profile;
        p.validate().map_err(|e| GovernorError::InvalidConfig(e.to_string()))?;
        if !self.allow_any_governor && !Governor::available_for(p.driver).contains(&self.governor) {
            return Err(GovernorError::Unsupported {
                governor: self.governor,
                driver: p.driver.as_str(),
                profile: p.name.clone(),
            });
        }
        if self.governor == Governor::Userspace {
            let s = self.set_speed_khz.ok_or(GovernorError::SetSpeedUnset)?;
            if s < p.min_freq_khz || s > p.max_freq_khz {
                return Err(GovernorError::SetSpeedOutOfRange(s));
            }
        }
        let ip = &self.interactive;
        if p.pstate_index(ip.hispeed_freq_khz).is_none() {
            return Err(GovernorError::InvalidConfig(format!(
                "hispeed_freq {} kHz is not a P-state",
                ip.hispeed_freq_khz
            )));
        }
        if !(ip.load_trigger > 0.0 && ip.load_trigger <= 1.0) {
            return Err(GovernorError::InvalidConfig("load_trigger must lie in (0, 1]".into()));
        }
        let t = &self.turbo;
        if t.ceiling_khz > p.max_freq_khz || t.ceiling_khz < p.min_freq_khz {
            return Err(GovernorError::InvalidConfig(format!("turbo ceiling {} kHz out of range", t.ceiling_khz)));
        }
        if t.budget_gain_per_idle_tick < 0.0 || t.budget_cost_per_boost_tick < 0.0 {
            return Err(GovernorError::InvalidConfig("turbo budget rates must be non-negative".into()));
        }
        Ok(())
    }

    /// Upper end of the load-proportional range.
    pub fn top_khz(&self) -> u32 {
        if self.turbo.enabled {
            self.turbo.ceiling_khz
        } else {
            self.profile.max_freq_khz
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GovernorState {
    pub governor: Governor,
    pub current_freq_khz: u32,
    pub set_speed_khz: Option<u32>,
    pub pelt_load: f64,
    pub boost_remaining_ms: u32,
    /// Time since the last frequency change (interactive rate limit).
    pub since_change_ms: u32,
    pub turbo_budget: f64,
}

impl GovernorState {
    pub fn initial(cfg: &SimConfig) -> Self {
        GovernorState {
            governor: cfg.governor,
            current_freq_khz: cfg.profile.min_freq_khz,
            set_speed_khz: cfg.set_speed_khz,
            pelt_load: 0.0,
            boost_remaining_ms: 0,
            since_change_ms: cfg.interactive.min_sample_time_ms,
            turbo_budget: 1.0,
        }
    }
}

fn proportional(min: u32, top: u32, load: f64) -> f64 {
    min as f64 + load * (top as f64 - min as f64)
}

/// Advances the state by one tick of `tick_ms` with the given load.
pub fn step_governor(
    state: &GovernorState,
    load: f64,
    tick_ms: u32,
    cfg: &SimConfig,
) -> Result<GovernorState, GovernorError> {
    if !(0.0..=1.0).contains(&load) {
        return Err(GovernorError::LoadOutOfRange(load));
    }
    let p = &cfg.profile;
    let top = cfg.top_khz();
    let mut next = state.clone();
    next.governor = cfg.governor;

    let pinned = matches!(cfg.governor, Governor::Performance)
        || (cfg.governor == Governor::Powersave && p.driver != ScalingDriver::IntelPstate);

    let mut desired = match cfg.governor {
        Governor::Performance => p.quantize(top as f64),
        Governor::Powersave if pinned => p.min_freq_khz,
        Governor::Powersave | Governor::Ondemand | Governor::Conservative | Governor::Interactive => {
            p.quantize(proportional(p.min_freq_khz, top, load))
        }
        Governor::Userspace => {
            let set = state.set_speed_khz.or(cfg.set_speed_khz).ok_or(GovernorError::SetSpeedUnset)?;
            next.set_speed_khz = Some(set);
            if cfg.turbo.enabled && set >= p.base_pstate() && top > set {
                p.quantize(proportional(set, top, load))
            } else {
                p.quantize(set as f64)
            }
        }
        Governor::Schedutil => {
            let alpha = 1.0 - 2f64.powf(-(tick_ms as f64) / PELT_HALFLIFE_MS);
            next.pelt_load = (alpha * load + (1.0 - alpha) * state.pelt_load).clamp(0.0, 1.0);
            let raw =
                p.min_freq_khz as f64 + SCHEDUTIL_HEADROOM * next.pelt_load * (top as f64 - p.min_freq_khz as f64);
            p.quantize(raw.min(top as f64))
        }
    };

    let turbo_gated = cfg.turbo.enabled && !pinned;
    let base = p.base_pstate();
    if turbo_gated && desired > base && state.turbo_budget <= cfg.turbo.budget_cost_per_boost_tick {
        desired = base;
    }

    let freq = match cfg.governor {
        Governor::Conservative => conservative_walk(p, state.current_freq_khz, desired, cfg.conservative_step_khz),
        Governor::Interactive => interactive_step(state, &mut next, load, tick_ms, desired, cfg),
        _ => desired,
    };
    if cfg.governor != Governor::Interactive {
        next.since_change_ms =
            if freq != state.current_freq_khz { 0 } else { state.since_change_ms.saturating_add(tick_ms) };
    }
    next.current_freq_khz = freq;

    if turbo_gated {
        let t = &cfg.turbo;
        if freq > base {
            next.turbo_budget = (next.turbo_budget - t.budget_cost_per_boost_tick).max(0.0);
        }
        if load < TURBO_IDLE_LOAD {
            next.turbo_budget = (next.turbo_budget + t.budget_gain_per_idle_tick).min(1.0);
        }
    }
    Ok(next)
}

/// Moves one P-state toward `target` per tick. The kernel's `freq_step`
/// is applied on the P-state grid, so any non-zero step is a single entry.
fn conservative_walk(p: &DeviceProfile, current: u32, target: u32, step_khz: u32) -> u32 {
    let cur = p.pstate_index(current).unwrap_or_else(|| p.pstate_index(p.quantize(current as f64)).unwrap());
    let tgt = p.pstate_index(target).unwrap();
    let idx = if step_khz == 0 || cur == tgt {
        cur
    } else if tgt > cur {
        cur + 1
    } else {
        cur - 1
    };
    p.pstates[idx]
}

fn interactive_step(
    state: &GovernorState,
    next: &mut GovernorState,
    load: f64,
    tick_ms: u32,
    ondemand: u32,
    cfg: &SimConfig,
) -> u32 {
    let ip = &cfg.interactive;
    let hispeed = ip.hispeed_freq_khz;
    let triggered = load >= ip.load_trigger;
    // The boost window only runs down while the floor is actually applied,
    // so a rate-limited trigger still gets its full hold once raised.
    next.boost_remaining_ms = if triggered {
        ip.boostpulse_duration_ms
    } else if state.current_freq_khz >= hispeed {
        state.boost_remaining_ms.saturating_sub(tick_ms)
    } else {
        state.boost_remaining_ms
    };
    let desired = if next.boost_remaining_ms > 0 { ondemand.max(hispeed) } else { ondemand };
    let since = state.since_change_ms.saturating_add(tick_ms);
    if desired != state.current_freq_khz && since >= ip.min_sample_time_ms {
        next.since_change_ms = 0;
        desired
    } else {
        next.since_change_ms = since;
        state.current_freq_khz
    }
}

/// Runs the governor over every tick of `workload`. Sample `i` is the
/// frequency after tick `i`.
pub fn simulate(workload: &WorkloadTrace, cfg: &SimConfig) -> Result<FrequencyTrace, GovernorError> {
    workload.validate()?;
    cfg.validate()?;
    let mut state = GovernorState::initial(cfg);
    let mut samples = Vec::with_capacity(workload.len());
    for &load in &workload.loads {
        state = step_governor(&state, load, workload.tick_ms, cfg)?;
        samples.push(state.current_freq_khz);
    }
    Ok(FrequencyTrace {
        samples,
        interval_ms: workload.tick_ms,
        label: None,
        device: cfg.profile.name.clone(),
        start_index: 0,
    })
}
