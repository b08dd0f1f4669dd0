//! `freqscope`: simulate, collect, classify and defend against CPU-frequency
//! side-channel traces.

mod commands;
mod config;
mod error;
mod lock;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::Config;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "freqscope", version, about = "CPU frequency side-channel toolkit")]
struct Cli {
    /// Configuration file of `section.key = value` lines.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one configuration key; repeatable. Applied after flags.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset through the governor simulator.
    Simulate(SimulateArgs),
    /// Record frequency traces from a simulated, replayed or sysfs source.
    Collect(CollectArgs),
    /// Train a website classifier on the train split of a dataset.
    Train(TrainArgs),
    /// Evaluate a trained model on the test split.
    Eval(EvalArgs),
    /// Detect keystrokes in a trace or recover passwords from a typing dataset.
    Keystrokes(KeystrokesArgs),
    /// Sweep countermeasures and report the attacker's accuracy.
    Defend(DefendArgs),
    /// Render result files as tables and plot data.
    Report(ReportArgs),
    /// List configuration keys with their defaults.
    Keys,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    governor: Option<String>,
    /// Pinned frequency for the userspace governor.
    #[arg(long, value_name = "KHZ")]
    set_speed: Option<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    /// website or keystrokes
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    measurements: Option<usize>,
    /// Password list, one per line.
    #[arg(long, value_name = "FILE")]
    passwords: Option<PathBuf>,
    #[arg(long)]
    per_label: Option<usize>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CollectArgs {
    /// sim, replay or sysfs
    #[arg(long)]
    source: Option<String>,
    /// Trace file played back by the replay source.
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// cpufreq policy number for the sysfs source.
    #[arg(long)]
    policy: Option<u32>,
    /// Treat the source as access restricted.
    #[arg(long)]
    masked: bool,
    #[arg(long)]
    label: Option<String>,
    /// Synthetic site driving the sim source.
    #[arg(long)]
    class: Option<u64>,
    #[arg(long)]
    interval_ms: Option<u32>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    measurements: Option<usize>,
    #[arg(long)]
    sleep_ms: Option<u64>,
    #[arg(long, value_name = "CMD")]
    pre_hook: Option<String>,
    #[arg(long, value_name = "CMD")]
    post_hook: Option<String>,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifierArgs {
    /// knn or rf
    #[arg(long)]
    classifier: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// none or minmax_per_profile
    #[arg(long)]
    normalization: Option<String>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct KeystrokesArgs {
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Typing dataset, one directory per password.
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Number of guesses on the reported curve.
    #[arg(long, value_name = "N")]
    guess_curve: Option<usize>,
    /// Password model to write (dataset mode) or rank against (trace mode).
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DefendArgs {
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[command(flatten)]
    classifier: ClassifierArgs,
    /// Comma-separated sample-and-hold factors.
    #[arg(long, value_name = "LIST")]
    resolution_factors: Option<String>,
    /// Comma-separated noise burst rates in Hz.
    #[arg(long, value_name = "LIST")]
    noise_rates: Option<String>,
    #[arg(long, value_name = "KHZ")]
    mask: Option<u32>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// report.json, sweep.csv or guess_curve.csv files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Flag values that override the config file.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn put<T: ToString>(&mut self, key: &'static str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &'static str, v: &Option<PathBuf>) -> &mut Self {
        self.put(key, v.as_ref().map(|p| p.display()))
    }

    fn sim(&mut self, a: &SimArgs) -> &mut Self {
        self.put("sim.profile", a.profile.as_ref())
            .put("sim.governor", a.governor.as_ref())
            .put("sim.set_speed_khz", a.set_speed)
    }

    fn classifier(&mut self, a: &ClassifierArgs) -> &mut Self {
        self.put("classifier.kind", a.classifier.as_ref())
            .put("classifier.k", a.k)
            .put("classifier.trees", a.trees)
            .put("classifier.normalization", a.normalization.as_ref())
    }
}

fn overrides(cmd: &Command) -> Overrides {
    let mut o = Overrides::default();
    match cmd {
        Command::Simulate(a) => {
            o.put("simulate.kind", a.kind.as_ref())
                .put("website.classes", a.classes)
                .put("website.measurements", a.measurements)
                .path("typing.passwords", &a.passwords)
                .put("typing.per_label", a.per_label)
                .sim(&a.sim)
                .path("simulate.out", &a.out);
        }
        Command::Collect(a) => {
            o.put("collect.source", a.source.as_ref())
                .path("collect.replay", &a.replay)
                .put("collect.policy", a.policy)
                .put("collect.masked", a.masked.then_some(true))
                .put("collect.label", a.label.as_ref())
                .put("collect.class", a.class)
                .put("collect.interval_ms", a.interval_ms)
                .put("collect.samples", a.samples)
                .put("collect.measurements", a.measurements)
                .put("collect.sleep_ms", a.sleep_ms)
                .put("collect.pre_hook", a.pre_hook.as_ref())
                .put("collect.post_hook", a.post_hook.as_ref())
                .sim(&a.sim)
                .path("collect.out", &a.out);
        }
        Command::Train(a) => {
            o.path("dataset.path", &a.dataset)
                .put("dataset.split_seed", a.split_seed)
                .classifier(&a.classifier)
                .path("model.path", &a.model);
        }
        Command::Eval(a) => {
            o.path("model.path", &a.model)
                .path("dataset.path", &a.dataset)
                .put("dataset.split_seed", a.split_seed)
                .put("eval.topk", a.topk)
                .path("eval.out", &a.out);
        }
        Command::Keystrokes(a) => {
            o.path("keystrokes.trace", &a.trace)
                .path("dataset.path", &a.dataset)
                .put("dataset.split_seed", a.split_seed)
                .put("keystrokes.guess_curve", a.guess_curve)
                .path("model.path", &a.model)
                .path("keystrokes.out", &a.out);
        }
        Command::Defend(a) => {
            o.path("dataset.path", &a.dataset)
                .put("dataset.split_seed", a.split_seed)
                .classifier(&a.classifier)
                .put("defend.resolution_factors", a.resolution_factors.as_ref())
                .put("defend.noise_rates_hz", a.noise_rates.as_ref())
                .put("defend.mask_khz", a.mask)
                .path("defend.out", &a.out);
        }
        Command::Report(a) => {
            let inputs: Vec<String> = a.inputs.iter().map(|p| p.display().to_string()).collect();
            o.put("report.inputs", Some(inputs.join(","))).path("report.out", &a.out);
        }
        Command::Keys => {}
    }
    o
}

fn resolve(cli: &Cli) -> CliResult<Config> {
    let mut cfg = Config::default();
    if let Some(path) = &cli.config {
        cfg.merge_file(path)?;
    }
    for (k, v) in overrides(&cli.command).0 {
        cfg.set(k, v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("global.seed", seed.to_string())?;
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn list_keys() {
    let width = config::KEYS.iter().map(|k| k.name.len()).max().unwrap_or(0);
    for k in config::KEYS {
        let default = if k.default.is_empty() { "\"\"" } else { k.default };
        println!("{:<width$}  {:<16}  {}", k.name, default, k.help);
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate::run(&cfg),
        Command::Collect(_) => commands::collect::run(&cfg),
        Command::Train(_) => commands::train::run(&cfg),
        Command::Eval(_) => commands::eval::run(&cfg),
        Command::Keystrokes(_) => commands::keystrokes::run(&cfg),
        Command::Defend(_) => commands::defend::run(&cfg),
        Command::Report(_) => commands::report::run(&cfg),
        Command::Keys => {
            list_keys();
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap reports usage errors with 2, help and version with 0
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError { exit, message }) => {
            eprintln!("freqscope: error: {message}");
            ExitCode::from(exit as u8)
        }
    }
}
