//! Keystroke detection on one trace, or password recovery over a typing
//! dataset.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use freqscope_core::classify::TrainedModel;
use freqscope_core::dataset::load_labeled_traces;
use freqscope_core::keystroke::{detect_keystrokes, guess_curve, train_password_model, KeystrokeParams, PasswordModel};
use freqscope_core::trace::load_trace;

use super::{ensure_dir, keystroke_params, write_file, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub fn run(cfg: &Config) -> CliResult<()> {
    let params = keystroke_params(cfg)?;
    if let Some(trace) = cfg.opt::<PathBuf>("keystrokes.trace")? {
        single(cfg, &trace, &params)
    } else if !cfg.get("dataset.path").is_empty() {
        dataset(cfg, &params)
    } else {
        Err(CliError::config("keystrokes needs a trace or a dataset"))
    }
}

fn single(cfg: &Config, path: &Path, params: &KeystrokeParams) -> CliResult<()> {
    let report = detect_keystrokes(&load_trace(path)?, params)?;
    let mut text = report.to_kv();
    if let Some(model) = cfg.opt::<PathBuf>("model.path")? {
        let pm = PasswordModel::from_trained(&TrainedModel::load(&model)?)?;
        let timings: Vec<f64> = report.inter_key_timings_ms.iter().map(|&x| x as f64).collect();
        let n: usize = cfg.parse("keystrokes.guess_curve")?;
        for (i, (label, score)) in pm.rank(&timings)?.iter().take(n).enumerate() {
            let _ = writeln!(text, "guess.{}={label},{score:.4}", i + 1);
        }
    }
    print!("{text}");
    if let Some(out) = cfg.opt::<PathBuf>("keystrokes.out")? {
        ensure_dir(&out)?;
        write_file(&out.join("keystrokes.kv"), &text)?;
        cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    }
    Ok(())
}

fn dataset(cfg: &Config, params: &KeystrokeParams) -> CliResult<()> {
    let traces = load_labeled_traces(&cfg.path("dataset.path")?)?;
    let mut timings = BTreeMap::new();
    for (label, ts) in traces {
        let vectors = ts
            .iter()
            .map(|t| {
                let r = detect_keystrokes(t, params)?;
                Ok(r.inter_key_timings_ms.iter().map(|&x| x as f64).collect())
            })
            .collect::<CliResult<Vec<Vec<f64>>>>()?;
        timings.insert(label, vectors);
    }
    let split_seed = cfg.split_seed()?;
    let (model, test) = train_password_model(&timings, split_seed)?;
    let n: usize = cfg.parse("keystrokes.guess_curve")?;
    let curve = guess_curve(&model, &test, n.min(model.password_labels.len()))?;
    let mut csv = String::from("guesses,accuracy\n");
    for (i, acc) in curve.iter().enumerate() {
        let _ = writeln!(csv, "{},{acc}", i + 1);
    }
    println!("{} passwords, {} test sessions", model.password_labels.len(), test.len());
    print!("{csv}");
    if let Some(path) = cfg.opt::<PathBuf>("model.path")? {
        let mut tm = model.to_trained();
        tm.metadata.insert("split_seed".into(), split_seed.to_string());
        tm.save(&path)?;
        cfg.write_resolved(&super::resolved_beside(&path))?;
    }
    if let Some(out) = cfg.opt::<PathBuf>("keystrokes.out")? {
        ensure_dir(&out)?;
        write_file(&out.join("guess_curve.csv"), &csv)?;
        cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    }
    Ok(())
}
