use std::path::PathBuf;

use freqscope_core::defend::{sweep, sweep_csv, sweep_plot_data, Defense};
use freqscope_core::profile;

use super::{classifier_params, ensure_dir, load_dataset, write_file, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult};

pub fn run(cfg: &Config) -> CliResult<()> {
    let ds = load_dataset(cfg)?;
    let params = classifier_params(cfg)?;
    let mut defenses: Vec<Defense> = cfg
        .list::<u32>("defend.resolution_factors")?
        .into_iter()
        .map(|factor| Defense::ResolutionReduce { factor })
        .collect();
    let height: f64 = cfg.parse("defend.noise_height")?;
    let seed = cfg.seed()?;
    for burst_rate_hz in cfg.list::<f64>("defend.noise_rates_hz")? {
        defenses.push(Defense::NoiseInject { burst_rate_hz, burst_height: height, seed });
    }
    let freq_khz = match cfg.opt::<u32>("defend.mask_khz")? {
        Some(f) => f,
        None => {
            let (_, first) = ds.iter().next().ok_or_else(|| CliError::config("dataset is empty"))?;
            let p =
                profile::builtin(&first.device).map_err(|e| CliError::new(crate::error::Exit::Parse, e.to_string()))?;
            p.pstates[p.pstates.len() / 2]
        }
    };
    defenses.push(Defense::ConstantMask { freq_khz });
    let rows = sweep(&defenses, &ds, &params)?;
    let csv = sweep_csv(&rows);
    print!("{csv}");
    if let Some(out) = cfg.opt::<PathBuf>("defend.out")? {
        ensure_dir(&out)?;
        write_file(&out.join("sweep.csv"), &csv)?;
        write_file(&out.join("sweep.dat"), &sweep_plot_data(&rows))?;
        cfg.write_resolved(&out.join(RESOLVED_FILE))?;
    }
    Ok(())
}
