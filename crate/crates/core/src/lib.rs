//! Frequency side-channel toolkit: governor simulation, trace capture,
//! website and keystroke classification, and countermeasure evaluation.

pub mod classify;
pub mod dataset;
pub mod defend;
pub mod experiment;
pub mod governor;
pub mod keystroke;
pub mod profile;
pub mod sampler;
pub mod seed;
pub mod source;
pub mod trace;
pub mod workload;

pub use classify::{EvalReport, ForestParams, KnnModel, Model, ModelKind, Normalization, TrainedModel};
pub use dataset::{LabeledDataset, SplitFractions};
pub use defend::{apply_defense, evaluate_defense, Defense};
pub use governor::{simulate, step_governor, Governor, GovernorState, SimConfig, WorkloadTrace};
pub use keystroke::{detect_keystrokes, KeystrokeParams, KeystrokeReport, PasswordModel};
pub use profile::{DeviceProfile, ScalingDriver};
pub use sampler::CollectPlan;
pub use source::{AccessPolicy, FreqSource};
pub use trace::FrequencyTrace;
pub use workload::{synth_workload, WorkloadKind};
