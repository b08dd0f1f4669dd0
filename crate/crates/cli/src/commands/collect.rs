//! Trace capture from a simulated, replayed or live cpufreq source.

use std::fs;
use std::path::PathBuf;

use freqscope_core::dataset::{label_dir, measurement_file_name};
use freqscope_core::sampler::{collect_with, CollectPlan};
use freqscope_core::source::{policy_path, sysfs_root, AccessPolicy, FreqSource};
use freqscope_core::trace::{load_trace, save_trace, EXTENSION};
use freqscope_core::workload::{synth_workload, WebsiteParams, WorkloadKind};

use super::{ensure_dir, sim_config, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::lock::DirLock;

fn plan(cfg: &Config) -> CliResult<CollectPlan> {
    let label = cfg.get("collect.label");
    if label.is_empty() {
        return Err(CliError::config("collect.label is required"));
    }
    let mut plan = CollectPlan::new(
        label,
        cfg.parse("collect.interval_ms")?,
        cfg.parse("collect.samples")?,
        cfg.parse("collect.measurements")?,
    );
    plan.pre_hook = cfg.opt("collect.pre_hook")?;
    plan.post_hook = cfg.opt("collect.post_hook")?;
    plan.inter_measurement_sleep_ms = cfg.parse("collect.sleep_ms")?;
    Ok(plan)
}

fn source(cfg: &Config, plan: &CollectPlan) -> CliResult<FreqSource> {
    let src = match cfg.get("collect.source") {
        "sim" => {
            let sim = sim_config(cfg)?;
            let tick_ms = 10u32;
            let total_ms = plan.measurements as u64
                * (plan.samples_per_measurement as u64 * plan.interval_ms as u64 + plan.inter_measurement_sleep_ms);
            let params = WebsiteParams {
                class_id: cfg.parse("collect.class")?,
                ticks: (total_ms / tick_ms as u64) as usize + 1,
                tick_ms,
                jitter: cfg.parse("website.jitter")?,
                timing_jitter_ticks: cfg.parse("website.timing_jitter_ticks")?,
                ..WebsiteParams::default()
            };
            let w = synth_workload(&WorkloadKind::Website(params), cfg.seed()?)?;
            FreqSource::sim(sim, w)?
        }
        "replay" => FreqSource::replay(load_trace(&cfg.path("collect.replay")?)?),
        "sysfs" => {
            let path = policy_path(&sysfs_root(), cfg.parse("collect.policy")?);
            FreqSource::sysfs(path).with_device(cfg.get("sim.profile"))
        }
        other => return Err(CliError::config(format!("collect.source `{other}`: expected sim, replay or sysfs"))),
    };
    Ok(if cfg.parse::<bool>("collect.masked")? { src.with_policy(AccessPolicy::Masked) } else { src })
}

pub fn run(cfg: &Config) -> CliResult<()> {
    let out = cfg.path("collect.out")?;
    let plan = plan(cfg)?;
    let mut src = source(cfg, &plan)?;
    let _lock = DirLock::acquire(&out)?;
    let dir = label_dir(&out, &plan.label);
    ensure_dir(&dir)?;
    // continue after the highest index so a gap never leads to an overwrite
    let existing = fs::read_dir(&dir)
        .map_err(|e| CliError::io(&dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .filter_map(|p| p.file_stem()?.to_str()?.parse::<usize>().ok())
        .max()
        .map_or(0, |i| i + 1);
    let mut save_error = None;
    let mut saved: Vec<PathBuf> = Vec::new();
    let result = collect_with(&plan, &mut src, |m, t| {
        if save_error.is_some() {
            return;
        }
        let path = dir.join(measurement_file_name(existing + m));
        match save_trace(t, &path) {
            Ok(()) => saved.push(path),
            Err(e) => save_error = Some(e),
        }
    });
    if let Some(e) = save_error {
        return Err(e.into());
    }
    result?;
    cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    println!(
        "collected {} measurement(s) of {} samples @{} ms for `{}` into {}",
        saved.len(),
        plan.samples_per_measurement,
        plan.interval_ms,
        plan.label,
        dir.display()
    );
    Ok(())
}
