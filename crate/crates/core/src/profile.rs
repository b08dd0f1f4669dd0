//! cpufreq attribute model for one CPU architecture and the built-in device
//! profiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("profile {0}: pstate table needs at least two entries")]
    TooFewPstates(String),
    #[error("profile {0}: pstates must be strictly ascending")]
    NotAscending(String),
    #[error("profile {0}: min/max frequency must equal first/last pstate")]
    BoundsMismatch(String),
    #[error("profile {0}: base frequency {1} kHz outside [min, max]")]
    BaseOutOfRange(String, u32),
    #[error("profile {0}: turbo ceiling {1} kHz must lie in (base, max]")]
    CeilingOutOfRange(String, u32),
    #[error("unknown device profile `{0}`")]
    Unknown(String),
}

/// Scaling driver backing a policy. The driver decides how a governor name
/// maps onto an actual frequency selection law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingDriver {
    IntelPstate,
    AcpiCpufreq,
    Msm,
}

impl ScalingDriver {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScalingDriver::IntelPstate => "intel_pstate",
            ScalingDriver::AcpiCpufreq => "acpi-cpufreq",
            ScalingDriver::Msm => "msm",
        }
    }
}

/// The cpufreq attributes of one policy. All frequencies are kHz, as sysfs
/// reports them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    pub min_freq_khz: u32,
    pub max_freq_khz: u32,
    pub base_freq_khz: Option<u32>,
    pub pstates: Vec<u32>,
    pub default_governor: String,
    pub driver: ScalingDriver,
    pub turbo_boost: bool,
    pub turbo_ceiling_khz: Option<u32>,
    pub transition_latency_ns: u32,
}

impl DeviceProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        let name = || self.name.clone();
        if self.pstates.len() < 2 {
            return Err(ProfileError::TooFewPstates(name()));
        }
        if self.pstates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ProfileError::NotAscending(name()));
        }
        if self.pstates[0] != self.min_freq_khz || *self.pstates.last().unwrap() != self.max_freq_khz {
            return Err(ProfileError::BoundsMismatch(name()));
        }
        if let Some(base) = self.base_freq_khz {
            if base < self.min_freq_khz || base > self.max_freq_khz {
                return Err(ProfileError::BaseOutOfRange(name(), base));
            }
        }
        if let Some(ceiling) = self.turbo_ceiling_khz {
            let lower = self.base_freq_khz.unwrap_or(self.min_freq_khz);
            if ceiling <= lower || ceiling > self.max_freq_khz {
                return Err(ProfileError::CeilingOutOfRange(name(), ceiling));
            }
        }
        Ok(())
    }

    /// Nearest P-state to `freq_khz`; an exact midpoint rounds up.
    pub fn quantize(&self, freq_khz: f64) -> u32 {
        let p = &self.pstates;
        if freq_khz <= p[0] as f64 {
            return p[0];
        }
        let idx = p.partition_point(|&s| (s as f64) < freq_khz);
        if idx == p.len() {
            return p[p.len() - 1];
        }
        let hi = p[idx];
        let lo = p[idx - 1];
        if (hi as f64 - freq_khz) <= (freq_khz - lo as f64) {
            hi
        } else {
            lo
        }
    }

    /// Index of `freq_khz` in the P-state table, if it is a P-state.
    pub fn pstate_index(&self, freq_khz: u32) -> Option<usize> {
        self.pstates.binary_search(&freq_khz).ok()
    }

    /// Highest P-state not above the base frequency: the top of the
    /// guaranteed (non-boost) range. Without a base frequency the whole
    /// table is guaranteed.
    pub fn base_pstate(&self) -> u32 {
        match self.base_freq_khz {
            Some(base) => {
                let idx = self.pstates.partition_point(|&s| s <= base);
                self.pstates[idx.saturating_sub(1)]
            }
            None => self.max_freq_khz,
        }
    }

    /// Effective upper bound of observable frequencies: the turbo ceiling
    /// when the profile boosts and has one, otherwise max_freq.
    pub fn effective_max_khz(&self) -> u32 {
        match (self.turbo_boost, self.turbo_ceiling_khz) {
            (true, Some(c)) => c,
            _ => self.max_freq_khz,
        }
    }
}

/// Ascending table in `step_khz` steps from `min` to `max`; `max` is always
/// the last entry even when it is off the step grid.
fn stepped_pstates(min: u32, max: u32, step_khz: u32) -> Vec<u32> {
    let mut out: Vec<u32> = (0..).map(|k| min + k * step_khz).take_while(|&f| f < max).collect();
    out.push(max);
    out
}

/// `count` evenly spaced frequencies anchored at both ends, rounded to kHz.
fn anchored_pstates(min: u32, max: u32, count: u32) -> Vec<u32> {
    let span = (max - min) as f64;
    (0..count).map(|k| (min as f64 + span * k as f64 / (count - 1) as f64).round() as u32).collect()
}

pub const BUILTIN_NAMES: [&str; 4] = ["comet_lake", "tiger_lake", "ryzen5", "cortex_a73"];

pub fn comet_lake() -> DeviceProfile {
    DeviceProfile {
        name: "comet_lake".into(),
        min_freq_khz: 400_000,
        max_freq_khz: 4_900_000,
        base_freq_khz: Some(1_800_000),
        pstates: stepped_pstates(400_000, 4_900_000, 100_000),
        default_governor: "powersave".into(),
        driver: ScalingDriver::IntelPstate,
        turbo_boost: true,
        // observed rendering peak, well under the nominal max
        turbo_ceiling_khz: Some(3_600_000),
        transition_latency_ns: 0,
    }
}

pub fn tiger_lake() -> DeviceProfile {
    DeviceProfile {
        name: "tiger_lake".into(),
        min_freq_khz: 400_000,
        max_freq_khz: 4_700_000,
        base_freq_khz: Some(2_800_000),
        pstates: stepped_pstates(400_000, 4_700_000, 100_000),
        default_governor: "powersave".into(),
        driver: ScalingDriver::IntelPstate,
        turbo_boost: true,
        turbo_ceiling_khz: None,
        transition_latency_ns: 0,
    }
}

pub fn ryzen5() -> DeviceProfile {
    DeviceProfile {
        name: "ryzen5".into(),
        min_freq_khz: 1_400_000,
        max_freq_khz: 4_060_000,
        base_freq_khz: Some(1_700_000),
        pstates: stepped_pstates(1_400_000, 4_060_000, 100_000),
        default_governor: "ondemand".into(),
        driver: ScalingDriver::AcpiCpufreq,
        turbo_boost: true,
        turbo_ceiling_khz: None,
        transition_latency_ns: 25_000,
    }
}

pub fn cortex_a73() -> DeviceProfile {
    DeviceProfile {
        name: "cortex_a73".into(),
        min_freq_khz: 806_000,
        max_freq_khz: 2_361_000,
        base_freq_khz: None,
        pstates: anchored_pstates(806_000, 2_361_000, 23),
        default_governor: "interactive".into(),
        driver: ScalingDriver::Msm,
        turbo_boost: false,
        turbo_ceiling_khz: None,
        transition_latency_ns: 80_000,
    }
}

pub fn builtin(name: &str) -> Result<DeviceProfile, ProfileError> {
    match name {
        "comet_lake" => Ok(comet_lake()),
        "tiger_lake" => Ok(tiger_lake()),
        "ryzen5" => Ok(ryzen5()),
        "cortex_a73" => Ok(cortex_a73()),
        other => Err(ProfileError::Unknown(other.to_string())),
    }
}

pub fn builtins() -> Vec<DeviceProfile> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).unwrap()).collect()
}
