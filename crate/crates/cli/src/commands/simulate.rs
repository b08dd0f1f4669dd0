//! Synthetic datasets through the governor simulator.

use std::fs;
use std::path::Path;

use freqscope_core::dataset::{label_dir, measurement_file_name};
use freqscope_core::experiment::WebsiteExperiment;
use freqscope_core::governor::simulate;
use freqscope_core::keystroke::{load_password_list, synth_typing, TypingParams, BUILTIN_PASSWORDS};
use freqscope_core::seed;
use freqscope_core::trace::save_trace;
use freqscope_core::workload::{synth_workload, WorkloadKind};

use super::{ensure_dir, sim_config, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::lock::DirLock;

pub fn run(cfg: &Config) -> CliResult<()> {
    let out = cfg.path("simulate.out")?;
    if fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(false) {
        return Err(CliError::config(format!("{} exists and is not empty", out.display())));
    }
    let _lock = DirLock::acquire(&out)?;
    let written = match cfg.get("simulate.kind") {
        "website" => website(cfg, &out)?,
        "keystrokes" => keystrokes(cfg, &out)?,
        other => return Err(CliError::config(format!("simulate.kind `{other}`: expected website or keystrokes"))),
    };
    cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    println!("{written}");
    Ok(())
}

fn website(cfg: &Config, out: &Path) -> CliResult<String> {
    let sim = sim_config(cfg)?;
    let mut e = WebsiteExperiment::new(
        sim.profile.clone(),
        sim.governor,
        cfg.parse("website.classes")?,
        cfg.parse("website.measurements")?,
        cfg.seed()?,
    );
    e.sim = sim;
    e.workload.ticks = cfg.parse("website.ticks")?;
    e.workload.tick_ms = cfg.parse("website.tick_ms")?;
    e.workload.jitter = cfg.parse("website.jitter")?;
    e.workload.timing_jitter_ticks = cfg.parse("website.timing_jitter_ticks")?;
    let ds = e.dataset()?;
    ds.save(out)?;
    Ok(format!(
        "wrote {} traces ({} classes x {}, {} samples @{} ms, {} / {}) to {}",
        ds.len(),
        e.classes,
        e.measurements,
        e.workload.ticks,
        e.workload.tick_ms,
        e.sim.profile.name,
        e.sim.governor,
        out.display()
    ))
}

fn keystrokes(cfg: &Config, out: &Path) -> CliResult<String> {
    let sim = sim_config(cfg)?;
    let passwords = match cfg.opt::<std::path::PathBuf>("typing.passwords")? {
        Some(p) => load_password_list(&fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?),
        None => load_password_list(BUILTIN_PASSWORDS),
    };
    if passwords.is_empty() {
        return Err(CliError::config("password list is empty"));
    }
    let per_label: usize = cfg.parse("typing.per_label")?;
    let typing = TypingParams { sigma_ms: cfg.parse("typing.sigma_ms")?, ..TypingParams::default() };
    let base = cfg.seed()?;
    for pw in &passwords {
        let dir = label_dir(out, pw);
        ensure_dir(&dir)?;
        for m in 0..per_label {
            let s = seed::derive(seed::derive_str(base, pw), m as u64);
            let w = synth_typing(pw, &typing, s);
            let loads = synth_workload(&WorkloadKind::Keystrokes(w), seed::derive(s, 1))?;
            let t = simulate(&loads, &sim)?.with_label(pw.as_str());
            save_trace(&t, &dir.join(measurement_file_name(m)))?;
        }
    }
    Ok(format!(
        "wrote {} typing traces ({} passwords x {per_label}, {} / {}) to {}",
        passwords.len() * per_label,
        passwords.len(),
        sim.profile.name,
        sim.governor,
        out.display()
    ))
}
