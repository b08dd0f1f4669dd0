use freqscope_core::classify::features::dataset_samples;
use freqscope_core::classify::{evaluate, TrainedModel};

use super::{ensure_dir, load_dataset, write_file, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub fn run(cfg: &Config) -> CliResult<()> {
    let tm = TrainedModel::load(&cfg.path("model.path")?)?;
    // evaluate on the split the model was trained against
    let mut cfg = cfg.clone();
    if cfg.get("dataset.split_seed").is_empty() {
        if let Some(s) = tm.metadata.get("split_seed") {
            cfg.set("dataset.split_seed", s.as_str())?;
        }
    }
    let ds = load_dataset(&cfg)?;
    let test = dataset_samples(&ds.split()?.test, tm.normalization)?;
    let k: usize = cfg.parse("eval.topk")?;
    if k == 0 {
        return Err(CliError::config("eval.topk must be at least 1"));
    }
    let report = evaluate(&tm.model, &test, &[k])?;
    print!("{}", report.to_table());
    if let Some(out) = cfg.opt::<std::path::PathBuf>("eval.out")? {
        ensure_dir(&out)?;
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::new(crate::error::Exit::Other, e.to_string()))?;
        write_file(&out.join("report.json"), &(json + "\n"))?;
        write_file(&out.join("report.kv"), &report.to_kv())?;
        write_file(&out.join("confusion.csv"), &report.confusion_csv())?;
        cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    }
    Ok(())
}
