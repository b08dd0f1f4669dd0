//! Renders result files as tables and plot-ready `.dat` series.

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use freqscope_core::classify::EvalReport;
use freqscope_core::defend::{sweep_plot_data, SweepRow};

use super::{ensure_dir, write_file, RESOLVED_FILE};
use crate::config::Config;
use crate::error::{CliError, CliResult, Exit};

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::new(Exit::Parse, format!("{}: {msg}", path.display()))
}

/// Left-aligned columns sized to their widest cell.
fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().enumerate().map(|(c, v)| format!("{v:<w$}", w = widths[c])).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|c| c.trim().to_string()).collect())
        .collect()
}

fn render(path: &Path) -> CliResult<(String, String)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let r: EvalReport = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
        let mut dat = String::from("# k topk_accuracy\n");
        for (k, acc) in &r.topk_accuracy {
            let _ = writeln!(dat, "{k} {acc}");
        }
        return Ok((r.to_table(), dat));
    }
    let rows = csv_rows(&text);
    let header = rows.first().map(|h| h.join(",")).unwrap_or_default();
    match header.as_str() {
        "defense,param,top1_clean,top1_defended" => {
            let parsed = rows[1..]
                .iter()
                .map(|r| {
                    let num = |i: usize| r.get(i).and_then(|v| v.parse::<f64>().ok());
                    match (r.len(), num(2), num(3)) {
                        (4, Some(clean), Some(defended)) => Ok(SweepRow {
                            defense: r[0].clone(),
                            param: r[1].clone(),
                            top1_clean: clean,
                            top1_defended: defended,
                        }),
                        _ => Err(parse_err(path, format!("bad sweep row `{}`", r.join(",")))),
                    }
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok((table(&rows), sweep_plot_data(&parsed)))
        }
        "guesses,accuracy" => {
            let mut dat = String::from("# guesses accuracy\n");
            for r in &rows[1..] {
                if r.len() != 2 || r[0].parse::<usize>().is_err() || r[1].parse::<f64>().is_err() {
                    return Err(parse_err(path, format!("bad guess-curve row `{}`", r.join(","))));
                }
                let _ = writeln!(dat, "{} {}", r[0], r[1]);
            }
            Ok((table(&rows), dat))
        }
        _ => Err(parse_err(path, "not a report.json, sweep.csv or guess_curve.csv")),
    }
}

pub fn run(cfg: &Config) -> CliResult<()> {
    let inputs = cfg.list::<PathBuf>("report.inputs")?;
    if inputs.is_empty() {
        return Err(CliError::config("report needs at least one input file"));
    }
    let out = cfg.opt::<PathBuf>("report.out")?;
    if let Some(dir) = &out {
        ensure_dir(dir)?;
    }
    for path in &inputs {
        let (text, dat) = render(path)?;
        println!("== {}", path.display());
        print!("{text}");
        let name = path.with_extension("dat");
        let name = name.file_name().unwrap_or_default();
        let target = match &out {
            Some(dir) => dir.join(name),
            None => path.with_extension("dat"),
        };
        write_file(&target, &dat)?;
    }
    if let Some(dir) = &out {
        cfg.write_resolved(&dir.join(RESOLVED_FILE))?;
    }
    Ok(())
}
