use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use contagion_cli::{cmd_generate, cmd_inspect, cmd_sweep, load_config, Failure, SweepOptions};

/// Knock-on default simulator for interbank credit networks.
#[derive(Parser)]
#[command(name = "contagion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one topology and write it as an edge list.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replication stream to draw from.
        #[arg(long, default_value_t = 0)]
        stream: u64,
    },
    /// Print the balance sheets of one topology and check their identities.
    Inspect {
        #[arg(long)]
        config: PathBuf,
        /// Edge-list file; defaults to the scenario's own topology.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Equity capital ratio; defaults to the first grid value.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        /// Write `balance.csv` here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo sweep over the R grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        workers: Option<usize>,
        /// Also write every N_d sample.
        #[arg(long)]
        raw_samples: bool,
        /// Also write every default event as NDJSON.
        #[arg(long)]
        trace: bool,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate {
            config,
            out,
            stream,
        } => {
            let cfg = load_config(&config)?;
            let summary = cmd_generate(&cfg, stream, &out)?;
            println!("{summary}");
        }
        Command::Inspect {
            config,
            topology,
            r,
            stream,
            out,
        } => {
            let cfg = load_config(&config)?;
            let report = match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    let path = dir.join("balance.csv");
                    let file = std::fs::File::create(&path)?;
                    cmd_inspect(&cfg, topology.as_deref(), r, stream, file)?
                }
                None => cmd_inspect(&cfg, topology.as_deref(), r, stream, std::io::stdout())?,
            };
            let mut err = std::io::stderr().lock();
            for w in &report.warnings {
                writeln!(err, "warning: {w}")?;
            }
            for v in &report.violations {
                writeln!(err, "violation: {v}")?;
            }
            if !report.is_clean() {
                return Err(Failure::Invalid(format!(
                    "{} balance-sheet identities violated",
                    report.violations.len()
                )));
            }
        }
        Command::Sweep {
            config,
            out,
            workers,
            raw_samples,
            trace,
        } => {
            let cfg = load_config(&config)?;
            let opts = SweepOptions {
                workers,
                raw_samples,
                trace,
            };
            let manifest = cmd_sweep(&cfg, &out, &opts)?;
            eprintln!(
                "{} replications x {} R values in {:.2}s",
                cfg.replications,
                cfg.r_grid.len(),
                manifest.wall_clock_seconds
            );
            for path in &manifest.outputs {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
