//! Command-line front end: training targets, instance extraction,
//! evaluation, dataset splitting and the roof-material probe.

mod common;
mod config;
mod eval;
mod instances;
mod probe;
mod split;
mod targets;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{Failure, Outcome, EXIT_IO};
use config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(
    name = "dowseg",
    version,
    about = "Ordinal watershed building segmentation pipeline"
)]
struct Cli {
    /// JSON or TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for file-level parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for cross-validation folds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    Targets(targets::TargetsArgs),
    Instances(instances::InstancesArgs),
    Eval(eval::EvalArgs),
    Split(split::SplitArgs),
    Probe(probe::ProbeArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Targets(_) => "targets",
            Command::Instances(_) => "instances",
            Command::Eval(_) => "eval",
            Command::Split(_) => "split",
            Command::Probe(_) => "probe",
        }
    }
}

fn execute(cli: Cli) -> Outcome {
    let config = match cli.config.as_deref().map(PipelineConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(f) => return Outcome::fail(f),
    };
    let workers = cli.workers.or(config.workers);
    if workers == Some(0) {
        return Outcome::fail(Failure::invalid("workers must be positive"));
    }
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return Outcome::fail(Failure::invalid(format!("thread pool: {e}"))),
    };
    pool.install(|| match cli.command {
        Command::Targets(a) => targets::run(a, &config),
        Command::Instances(a) => instances::run(a, &config),
        Command::Eval(a) => eval::run(a, &config),
        Command::Split(a) => split::run(a, &config),
        Command::Probe(a) => probe::run(a, &config, seed),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let outcome = execute(cli);

    let mut stdout = std::io::stdout().lock();
    for line in &outcome.logs {
        let _ = writeln!(stdout, "{line}");
    }
    let mut stderr = std::io::stderr().lock();
    for f in &outcome.failures {
        let _ = writeln!(stderr, "{}", f.to_json(name));
    }
    let code = outcome.failures.iter().map(|f| f.code).max().unwrap_or(0);
    debug_assert!(code <= EXIT_IO);
    ExitCode::from(code as u8)
}
