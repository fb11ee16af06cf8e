use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use netweave_cli::pipeline::{run_all, BudgetPolicy, Stage};
use netweave_cli::{error_kind, sweep, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "netweave",
    version,
    about = "Localize IoT end-nodes and extract power-aware topologies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate networks and noisy distance measurements.
    Generate(Common),
    /// Generate and localize; reports localization error per run.
    Localize(Common),
    /// Full pipeline: localization followed by topology extraction.
    #[command(alias = "run")]
    Topology(Common),
    /// Full pipeline over every sweep point plus summary tables.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, alias = "seed")]
    seeds: Option<String>,
    /// Comma-separated end-node counts.
    #[arg(long)]
    nodes: Option<String>,
    #[arg(long)]
    gateways: Option<String>,
    /// Side of the square deployment area.
    #[arg(long = "area-m")]
    area_m: Option<String>,
    /// Comma-separated noise factors.
    #[arg(long)]
    eta: Option<String>,
    /// Comma-separated algorithms: iotntop, bruteforce, lmst.
    #[arg(long)]
    algo: Option<String>,
    /// Coordinates given to the topology algorithms: truth or estimated.
    #[arg(long)]
    frames: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let flags = [
            ("seeds", &self.seeds),
            ("nodes", &self.nodes),
            ("gateways", &self.gateways),
            ("area_m", &self.area_m),
            ("etas", &self.eta),
            ("algorithms", &self.algo),
            ("frames", &self.frames),
            ("out", &self.out),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{o}`"))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    let (common, stage) = match &cli.command {
        Command::Generate(c) => (c, Some(Stage::Generate)),
        Command::Localize(c) => (c, Some(Stage::Localize)),
        Command::Topology(c) => (c, Some(Stage::Topology)),
        Command::Sweep(c) => (c, None),
    };
    let cfg = common.config()?;
    let results = match stage {
        Some(stage) => run_all(&cfg, stage, BudgetPolicy::Fail)?,
        None => sweep(&cfg)?,
    };
    println!("{} run(s) written to {}", results.len(), cfg.scenario_dir().display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "error": error_kind(&e),
                "message": format!("{e:#}"),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
