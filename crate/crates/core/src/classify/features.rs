//! Raw frequency samples as feature vectors, optionally min-max scaled to
//! the recording device's frequency range.

use serde::{Deserialize, Serialize};

use super::{ClassifyError, Sample};
use crate::dataset::LabeledDataset;
use crate::profile::{self, DeviceProfile};
use crate::trace::FrequencyTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Maps the device's `[min_freq, turbo ceiling or max_freq]` to `[0, 1]`.
    MinmaxPerProfile,
}

impl std::str::FromStr for Normalization {
    type Err = ClassifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Normalization::None),
            "minmax_per_profile" | "minmax" => Ok(Normalization::MinmaxPerProfile),
            other => Err(ClassifyError::InvalidParam(format!("unknown normalization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl FeatureVector {
    pub fn raw(trace: &FrequencyTrace) -> Self {
        FeatureVector { values: trace.samples.iter().map(|&s| s as f64).collect(), normalization: Normalization::None }
    }

    /// Scales raw kHz values into the profile's range. Already-normalized
    /// vectors are returned unchanged.
    pub fn minmax(self, profile: &DeviceProfile) -> Self {
        if self.normalization == Normalization::MinmaxPerProfile {
            return self;
        }
        let lo = profile.min_freq_khz as f64;
        let span = (profile.effective_max_khz() as f64 - lo).max(1.0);
        FeatureVector {
            values: self.values.into_iter().map(|v| (v - lo) / span).collect(),
            normalization: Normalization::MinmaxPerProfile,
        }
    }

    pub fn from_trace(trace: &FrequencyTrace, normalization: Normalization) -> Result<Self, ClassifyError> {
        let raw = FeatureVector::raw(trace);
        match normalization {
            Normalization::None => Ok(raw),
            Normalization::MinmaxPerProfile => {
                let p =
                    profile::builtin(&trace.device).map_err(|_| ClassifyError::UnknownDevice(trace.device.clone()))?;
                Ok(raw.minmax(&p))
            }
        }
    }
}

pub fn dataset_samples(ds: &LabeledDataset, normalization: Normalization) -> Result<Vec<Sample>, ClassifyError> {
    ds.iter().map(|(label, t)| Ok((FeatureVector::from_trace(t, normalization)?.values, label.to_string()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{comet_lake, ryzen5};
    use proptest::prelude::*;

    #[test]
    fn minmax_maps_range() {
        let t = FrequencyTrace::new(vec![400_000, 3_600_000, 2_000_000], 10, "comet_lake").unwrap();
        let f = FeatureVector::from_trace(&t, Normalization::MinmaxPerProfile).unwrap();
        assert_eq!(f.values, vec![0.0, 1.0, 0.5]);
        let unknown = FrequencyTrace::new(vec![1], 10, "m2").unwrap();
        assert!(FeatureVector::from_trace(&unknown, Normalization::MinmaxPerProfile).is_err());
    }

    proptest! {
        #[test]
        fn minmax_idempotent_and_order_preserving(values in prop::collection::vec(1_400_000u32..4_060_000, 2..50)) {
            let t = FrequencyTrace::new(values.clone(), 10, "ryzen5").unwrap();
            let once = FeatureVector::raw(&t).minmax(&ryzen5());
            let twice = once.clone().minmax(&comet_lake());
            prop_assert_eq!(&once, &twice);
            for i in 0..values.len() {
                for j in 0..values.len() {
                    prop_assert_eq!(values[i] < values[j], once.values[i] < once.values[j]);
                }
            }
        }
    }
}
