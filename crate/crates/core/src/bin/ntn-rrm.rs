use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ntn_rrm::config::{Config, Policy};
use ntn_rrm::harness::{self, output, RunPlan};
use ntn_rrm::par::Execution;
use ntn_rrm::scenario::{self, PositionLabel};
use ntn_rrm::{Error, Result};

#[derive(Parser)]
#[command(name = "ntn-rrm", version, about = "Integrated terrestrial + LEO satellite downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the daily sweep and write metrics, traces and a manifest.
    Run(RunArgs),
    /// Inspect generated deployments.
    Scenario {
        #[command(subcommand)]
        what: DumpCommand,
    },
    /// Inspect channel gains.
    Channel {
        #[command(subcommand)]
        what: DumpCommand,
    },
}

#[derive(Subcommand)]
enum DumpCommand {
    /// Write one snapshot as CSV.
    Dump(DumpArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    policies: Option<Vec<Policy>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    hours: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Option<Vec<u64>>,
    #[arg(long = "lambda-max", value_delimiter = ',', num_args = 1..)]
    lambda_max: Option<Vec<f64>>,
    /// Worker threads; 0 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    hour: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "P2")]
    position: PositionLabel,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load(&args.config)?;
    if let Some(p) = args.policies {
        cfg.plan.policies = p;
    }
    if let Some(h) = args.hours {
        cfg.plan.hours = h;
    }
    if let Some(s) = args.seeds {
        cfg.plan.seeds = s;
    }
    if let Some(l) = args.lambda_max {
        cfg.plan.lambda_max = l;
    }
    let mut plan = RunPlan::new(cfg)?;
    match args.workers {
        Some(0) => plan.exec = Execution::Sequential,
        w => plan.workers = w,
    }
    let (result, files) = harness::run_and_write(&plan, &args.out)?;
    eprintln!("{} runs, {} hourly rows, {} files in {}", result.records.len(), result.hourly.len(), files.len(), args.out.display());
    Ok(())
}

fn dump(args: DumpArgs, channel: bool) -> Result<()> {
    let cfg = load(&args.config)?;
    let grid = scenario::build_grid(&cfg.area, &cfg.terrestrial_site)?;
    let snap = harness::build_snapshot(&cfg, &grid, args.hour, args.seed, args.position, Execution::Parallel)?;
    let mut w = sink(&args.out)?;
    if channel {
        snap.channel.write_csv(&mut w)?;
    } else {
        output::write_scenario(&snap.scenario, &mut w)?;
    }
    w.flush().map_err(|e| Error::io("output", e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(a) => run(a),
        Command::Scenario { what: DumpCommand::Dump(a) } => dump(a, false),
        Command::Channel { what: DumpCommand::Dump(a) } => dump(a, true),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
