pub mod collect;
pub mod defend;
pub mod eval;
pub mod keystrokes;
pub mod report;
pub mod simulate;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use freqscope_core::classify::{ForestParams, ModelKind, Normalization};
use freqscope_core::dataset::{merge_datasets, LabeledDataset, SplitFractions};
use freqscope_core::experiment::ClassifierParams;
use freqscope_core::governor::{Governor, SimConfig, TurboParams};
use freqscope_core::keystroke::KeystrokeParams;
use freqscope_core::profile;

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const RESOLVED_FILE: &str = "resolved.conf";

pub fn sim_config(cfg: &Config) -> CliResult<SimConfig> {
    let name = cfg.get("sim.profile");
    let p = profile::builtin(name).map_err(|e| CliError::config(e.to_string()))?;
    let governor = match cfg.opt::<Governor>("sim.governor")? {
        Some(g) => g,
        None => p.default_governor.parse()?,
    };
    let mut sim = SimConfig::new(p, governor);
    sim.set_speed_khz = cfg.opt("sim.set_speed_khz")?;
    sim.allow_any_governor = cfg.parse("sim.allow_any_governor")?;
    if !cfg.parse::<bool>("sim.turbo")? {
        sim.turbo = TurboParams::disabled(&sim.profile);
    }
    sim.seed = cfg.seed()?;
    sim.validate()?;
    Ok(sim)
}

pub fn classifier_params(cfg: &Config) -> CliResult<ClassifierParams> {
    Ok(ClassifierParams {
        kind: cfg.parse::<ModelKind>("classifier.kind")?,
        k: cfg.parse("classifier.k")?,
        forest: ForestParams {
            n_trees: cfg.parse("classifier.trees")?,
            max_depth: cfg.parse("classifier.max_depth")?,
            min_leaf: cfg.parse("classifier.min_leaf")?,
            feature_subsample: None,
            seed: cfg.seed()?,
        },
        normalization: cfg.parse::<Normalization>("classifier.normalization")?,
    })
}

pub fn keystroke_params(cfg: &Config) -> CliResult<KeystrokeParams> {
    let p = KeystrokeParams {
        idle_freq_khz: cfg.parse("keystroke.idle_freq_khz")?,
        peak_cap_khz: cfg.parse("keystroke.peak_cap_khz")?,
        sustained_freq_khz: cfg.parse("keystroke.sustained_freq_khz")?,
        min_pulse_samples: cfg.parse("keystroke.min_pulse_samples")?,
        max_single_pulse_samples: cfg.parse("keystroke.max_single_pulse_samples")?,
        decay_ms: cfg.parse("keystroke.decay_ms")?,
        sample_interval_ms: cfg.parse("keystroke.sample_interval_ms")?,
    };
    p.validate()?;
    Ok(p)
}

/// Fixed-shape website dataset with the 80/10/10 split. A comma-separated
/// `dataset.path` merges several directories, e.g. one per device.
pub fn load_dataset(cfg: &Config) -> CliResult<LabeledDataset> {
    let roots = cfg.list::<PathBuf>("dataset.path")?;
    let split_seed = cfg.split_seed()?;
    let mut parts = roots
        .iter()
        .map(|r| LabeledDataset::load(r, split_seed, SplitFractions::WEBSITE))
        .collect::<Result<Vec<_>, _>>()?;
    match parts.len() {
        0 => Err(CliError::config("dataset.path is required")),
        1 => Ok(parts.remove(0)),
        _ => Ok(merge_datasets(&parts)?),
    }
}

pub fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// `<file>.resolved.conf` beside a single-file output.
pub fn resolved_beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".resolved.conf");
    file.with_file_name(name)
}
