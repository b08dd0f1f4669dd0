//! Line-oriented `section.key = value` configuration.
//!
//! Every key has a registered default; files and `--set` may only name
//! registered keys. Command-line flags override the file, which overrides
//! the defaults. The resolved map is written next to each run's outputs.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{CliError, CliResult};

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

/// Output locations; left out of resolved files, which live inside them.
const OUTPUT_KEYS: [&str; 6] =
    ["simulate.out", "collect.out", "eval.out", "keystrokes.out", "defend.out", "report.out"];

pub const KEYS: &[Key] = &[
    key("global.seed", "1", "seed for workloads, splits, forests and noise"),
    key("sim.profile", "ryzen5", "device profile: comet_lake, tiger_lake, ryzen5, cortex_a73"),
    key("sim.governor", "", "scaling governor; empty selects the profile default"),
    key("sim.set_speed_khz", "", "scaling_setspeed for the userspace governor"),
    key("sim.turbo", "true", "model the turbo budget where the profile has one"),
    key("sim.allow_any_governor", "false", "skip the driver's governor availability check"),
    key("simulate.kind", "website", "website or keystrokes"),
    key("simulate.out", "", "dataset directory to create"),
    key("website.classes", "20", "number of synthetic sites"),
    key("website.measurements", "30", "traces per site"),
    key("website.ticks", "1000", "samples per trace"),
    key("website.tick_ms", "10", "sampling interval"),
    key("website.jitter", "0.5", "standard deviation of per-tick load noise"),
    key("website.timing_jitter_ticks", "5", "maximum per-burst start delay"),
    key("typing.passwords", "", "password list file; empty uses the bundled list"),
    key("typing.per_label", "10", "typing sessions per password"),
    key("typing.sigma_ms", "30", "standard deviation of each inter-key gap"),
    key("collect.source", "sim", "sim, replay or sysfs"),
    key("collect.replay", "", "trace file for the replay source"),
    key("collect.policy", "0", "cpufreq policy number for the sysfs source"),
    key("collect.masked", "false", "deny frequency reads as an access-restricted system would"),
    key("collect.class", "0", "synthetic site driving the sim source"),
    key("collect.interval_ms", "10", "sampling interval"),
    key("collect.samples", "1000", "samples per measurement"),
    key("collect.measurements", "1", "measurements to record"),
    key("collect.label", "", "class label of the recorded traces"),
    key("collect.pre_hook", "", "shell command run before each measurement"),
    key("collect.post_hook", "", "shell command run after each measurement"),
    key("collect.sleep_ms", "1000", "pause between measurements"),
    key("collect.out", "", "dataset directory to append to"),
    key("dataset.path", "", "dataset directory to read; comma-separated directories are merged"),
    key("dataset.split_seed", "", "split seed; empty uses global.seed"),
    key("classifier.kind", "knn", "knn or rf"),
    key("classifier.k", "1", "neighbours for knn"),
    key("classifier.trees", "100", "trees for rf"),
    key("classifier.max_depth", "20", "maximum tree depth for rf"),
    key("classifier.min_leaf", "1", "minimum samples per rf leaf"),
    key("classifier.normalization", "none", "none or minmax_per_profile"),
    key("model.path", "", "model file to write (train) or read (eval, keystrokes)"),
    key("eval.topk", "5", "additional top-k accuracy to report"),
    key("eval.out", "", "directory for report files"),
    key("keystroke.idle_freq_khz", "800000", "idle frequency"),
    key("keystroke.peak_cap_khz", "1600000", "highest peak of a single press"),
    key("keystroke.sustained_freq_khz", "1200000", "floor of a fused double press"),
    key("keystroke.min_pulse_samples", "8", "shortest press plateau"),
    key("keystroke.max_single_pulse_samples", "12", "longest single press plateau"),
    key("keystroke.decay_ms", "200", "typical fall-back time to idle"),
    key("keystroke.sample_interval_ms", "20", "expected trace interval"),
    key("keystrokes.trace", "", "single trace to analyse"),
    key("keystrokes.guess_curve", "3", "guess counts to report"),
    key("keystrokes.out", "", "directory for keystroke outputs"),
    key("defend.resolution_factors", "1,2,5,10,25,50", "sample-and-hold factors; 1 is the clean baseline"),
    key("defend.noise_rates_hz", "5,10,20,50", "noise burst rates"),
    key("defend.noise_height", "1.0", "noise burst height as a fraction of the frequency range"),
    key("defend.mask_khz", "", "constant mask frequency; empty picks the middle P-state"),
    key("defend.out", "", "directory for sweep outputs"),
    key("report.inputs", "", "comma-separated report.json, sweep.csv or guess_curve.csv files"),
    key("report.out", "", "directory for plot data; defaults next to each input"),
];

pub fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { values: KEYS.iter().map(|k| (k.name, k.default.to_string())).collect() }
    }
}

impl Config {
    pub fn set(&mut self, name: &str, value: impl Into<String>) -> CliResult<()> {
        let k = lookup(name).ok_or_else(|| CliError::config(format!("unknown config key `{name}`")))?;
        self.values.insert(k.name, value.into());
        Ok(())
    }

    /// Applies `key=value` (command-line form).
    pub fn set_pair(&mut self, pair: &str) -> CliResult<()> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| CliError::config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn merge_text(&mut self, text: &str, origin: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("{origin}:{}: expected `section.key = value`", i + 1)))?;
            self.set(k.trim(), v.trim()).map_err(|e| CliError::config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> CliResult<()> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn get(&self, name: &str) -> &str {
        self.values.get(name).map(String::as_str).unwrap_or_else(|| panic!("unregistered key {name}"))
    }

    pub fn parse<T: FromStr>(&self, name: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.get(name);
        v.parse().map_err(|e| CliError::config(format!("{name} = `{v}`: {e}")))
    }

    /// `None` for an empty value.
    pub fn opt<T: FromStr>(&self, name: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.get(name).is_empty() {
            Ok(None)
        } else {
            self.parse(name).map(Some)
        }
    }

    pub fn list<T: FromStr>(&self, name: &str) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(name)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::config(format!("{name}: `{s}`: {e}"))))
            .collect()
    }

    pub fn path(&self, name: &str) -> CliResult<PathBuf> {
        self.opt::<PathBuf>(name)?.ok_or_else(|| CliError::config(format!("{name} is required")))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.parse("global.seed")
    }

    pub fn split_seed(&self) -> CliResult<u64> {
        match self.opt("dataset.split_seed")? {
            Some(s) => Ok(s),
            None => self.seed(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# freqscope resolved configuration\n");
        for k in KEYS.iter().filter(|k| !OUTPUT_KEYS.contains(&k.name)) {
            let line = format!("{} = {}", k.name, self.values[k.name]);
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }

    pub fn write_resolved(&self, path: &Path) -> CliResult<()> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_unique_keys() {
        let mut names: Vec<&str> = KEYS.iter().map(|k| k.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), KEYS.len());
        assert!(OUTPUT_KEYS.iter().all(|k| lookup(k).is_some()));
    }

    #[test]
    fn file_overrides_and_rejects_unknown() {
        let mut c = Config::default();
        c.merge_text("# comment\n\nsim.profile = comet_lake\ncollect.pre_hook = echo a=b # kept\n", "t").unwrap();
        assert_eq!(c.get("sim.profile"), "comet_lake");
        assert_eq!(c.get("collect.pre_hook"), "echo a=b # kept");
        let e = c.merge_text("sim.profil = x", "t").unwrap_err();
        assert_eq!(e.exit, crate::error::Exit::Config);
        assert!(e.message.contains("t:1"));
        assert!(c.merge_text("just words", "t").is_err());
    }

    #[test]
    fn typed_access() {
        let mut c = Config::default();
        assert_eq!(c.list::<u32>("defend.resolution_factors").unwrap(), vec![1, 2, 5, 10, 25, 50]);
        assert_eq!(c.opt::<u32>("sim.set_speed_khz").unwrap(), None);
        c.set_pair("website.classes=abc").unwrap();
        assert!(c.parse::<usize>("website.classes").is_err());
        assert_eq!(c.split_seed().unwrap(), 1);
    }

    #[test]
    fn resolved_text_round_trips() {
        let mut c = Config::default();
        c.set("global.seed", "9").unwrap();
        c.set("simulate.out", "/tmp/x").unwrap();
        let text = c.to_text();
        assert!(!text.contains("simulate.out"));
        let mut d = Config::default();
        d.merge_text(&text, "r").unwrap();
        d.set("simulate.out", "/tmp/x").unwrap();
        assert_eq!(c, d);
    }
}
