//! Error type carrying the process exit code.

use std::fmt;

use freqscope_core::classify::ClassifyError;
use freqscope_core::dataset::DatasetError;
use freqscope_core::defend::DefendError;
use freqscope_core::experiment::ExperimentError;
use freqscope_core::governor::GovernorError;
use freqscope_core::keystroke::KeystrokeError;
use freqscope_core::sampler::SampleError;
use freqscope_core::source::SourceError;
use freqscope_core::trace::TraceError;
use freqscope_core::workload::WorkloadError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Other = 1,
    Config = 2,
    Parse = 3,
    Source = 4,
    AccessRestricted = 5,
    Locked = 6,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        CliError { exit, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(Exit::Config, message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::new(Exit::Other, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Implements `From<$err>` with the exit code chosen by `$exit`.
macro_rules! with_code {
    ($err:ty, $exit:expr) => {
        impl From<$err> for CliError {
            fn from(e: $err) -> Self {
                let exit: fn(&$err) -> Exit = $exit;
                CliError::new(exit(&e), e.to_string())
            }
        }
    };
}

fn trace_exit(e: &TraceError) -> Exit {
    match e {
        TraceError::Io { .. } => Exit::Other,
        _ => Exit::Parse,
    }
}

fn governor_exit(e: &GovernorError) -> Exit {
    match e {
        GovernorError::LoadOutOfRange(_) | GovernorError::InvalidWorkload(_) => Exit::Other,
        _ => Exit::Config,
    }
}

fn source_exit(e: &SourceError) -> Exit {
    match e {
        SourceError::AccessDenied => Exit::AccessRestricted,
        SourceError::Governor(_) => Exit::Config,
        _ => Exit::Source,
    }
}

fn sample_exit(e: &SampleError) -> Exit {
    match e {
        SampleError::Source { source, .. } => source_exit(source),
        SampleError::InvalidPlan(_) => Exit::Config,
        SampleError::Hook { .. } => Exit::Other,
    }
}

fn dataset_exit(e: &DatasetError) -> Exit {
    match e {
        DatasetError::Io { .. } => Exit::Other,
        DatasetError::Trace(t) => trace_exit(t),
        DatasetError::FractionSum(_) | DatasetError::FractionRange(_) => Exit::Config,
        _ => Exit::Parse,
    }
}

fn classify_exit(e: &ClassifyError) -> Exit {
    match e {
        ClassifyError::Dataset(d) => dataset_exit(d),
        ClassifyError::ModelFile(_) | ClassifyError::UnknownDevice(_) | ClassifyError::DimensionMismatch { .. } => {
            Exit::Parse
        }
        ClassifyError::InvalidParam(_) | ClassifyError::KTooLarge { .. } => Exit::Config,
        _ => Exit::Other,
    }
}

fn keystroke_exit(e: &KeystrokeError) -> Exit {
    match e {
        KeystrokeError::Classify(c) => classify_exit(c),
        KeystrokeError::IntervalMismatch { .. } => Exit::Parse,
        KeystrokeError::TooFewMeasurements { .. } | KeystrokeError::TooFewLabels => Exit::Parse,
        _ => Exit::Config,
    }
}

fn experiment_exit(e: &ExperimentError) -> Exit {
    match e {
        ExperimentError::Governor(_) | ExperimentError::Workload(_) => Exit::Config,
        ExperimentError::Dataset(d) => dataset_exit(d),
        ExperimentError::Classify(c) => classify_exit(c),
        ExperimentError::Keystroke(k) => keystroke_exit(k),
    }
}

fn defend_exit(e: &DefendError) -> Exit {
    match e {
        DefendError::Experiment(x) => experiment_exit(x),
        DefendError::UnknownDevice(_) => Exit::Parse,
        DefendError::SourceOnly | DefendError::Invalid(_) => Exit::Config,
    }
}

with_code!(TraceError, trace_exit);
with_code!(GovernorError, governor_exit);
with_code!(WorkloadError, |_| Exit::Config);
with_code!(SourceError, source_exit);
with_code!(SampleError, sample_exit);
with_code!(DatasetError, dataset_exit);
with_code!(ClassifyError, classify_exit);
with_code!(KeystrokeError, keystroke_exit);
with_code!(ExperimentError, experiment_exit);
with_code!(DefendError, defend_exit);
