use freqscope_core::classify::{ModelKind, TrainedModel};
use freqscope_core::experiment::train;

use super::{classifier_params, load_dataset, resolved_beside};
use crate::config::Config;
use crate::error::CliResult;

pub fn run(cfg: &Config) -> CliResult<()> {
    let model_path = cfg.path("model.path")?;
    let ds = load_dataset(cfg)?;
    let split = ds.split()?;
    let params = classifier_params(cfg)?;
    let model = train(&split.train, &params)?;
    let mut tm = TrainedModel::new(model, params.normalization);
    tm.metadata.insert("dataset".into(), cfg.get("dataset.path").into());
    tm.metadata.insert("split_seed".into(), ds.split_seed.to_string());
    tm.metadata.insert("classes".into(), ds.num_classes().to_string());
    tm.metadata.insert("train_traces".into(), split.train.len().to_string());
    tm.save(&model_path)?;
    cfg.write_resolved(&resolved_beside(&model_path))?;
    println!(
        "trained {} on {} traces of {} classes (split seed {}) -> {}",
        if tm.model.kind() == ModelKind::Knn { "knn" } else { "rf" },
        split.train.len(),
        ds.num_classes(),
        ds.split_seed,
        model_path.display()
    );
    Ok(())
}
