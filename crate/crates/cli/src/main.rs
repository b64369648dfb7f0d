//! `replicast`: simulate and compare replicated deployments, solve
//! interface-to-server matchings, size spot fleets and run a loopback demo.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod analysis;
mod demo;
mod error;
mod launch;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "replicast", version, about = "Fault-tolerant request replication toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its trace, event log and summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run variants of a scenario under common random numbers.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated: `replicated`, `single:SERVER`, `single:SERVER@IFACE`.
        #[arg(long)]
        variants: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the comparison as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Solve an interface-to-server assignment.
    Match {
        /// CSV matrix of miss probabilities, one row per interface.
        #[arg(long, conflicts_with = "samples", required_unless_present = "samples")]
        costs: Option<PathBuf>,
        /// JSON latency samples to estimate miss probabilities from.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        deadline: Option<f64>,
        #[arg(long, default_value = "sum")]
        mode: String,
        /// Comma-separated per-server capacities.
        #[arg(long)]
        capacities: Option<String>,
    },
    /// Replicas needed to reach a system failure target.
    Replicas {
        #[arg(long, default_value = "15h")]
        uptime: String,
        #[arg(long)]
        recovery: String,
        #[arg(long)]
        target: f64,
    },
    /// Grow or shrink a running demo fleet.
    Scale {
        #[arg(value_parser = ["up", "down"])]
        direction: String,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        fleet: SocketAddr,
    },
    /// Directory, replica processes and a robot client over loopback UDP.
    Demo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        requests: usize,
        /// Where ports, requests.csv and connections.json go.
        #[arg(long)]
        run_dir: Option<PathBuf>,
    },
    /// Histogram, CDF and summary of a trace CSV.
    Report {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        bucket_ms: f64,
    },
    #[command(hide = true)]
    Serve(demo::ServeArgs),
    #[command(hide = true)]
    Directory {
        #[arg(long, default_value = "127.0.0.1:0")]
        bind: SocketAddr,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, out } => analysis::simulate(&config, seed, &out),
        Command::Compare {
            config,
            variants,
            seed,
            json,
        } => analysis::compare(&config, &variants, seed, json.as_deref()),
        Command::Match {
            costs,
            samples,
            deadline,
            mode,
            capacities,
        } => analysis::matching(costs.as_deref(), samples.as_deref(), deadline, &mode, capacities.as_deref()),
        Command::Replicas { uptime, recovery, target } => analysis::replicas(&uptime, &recovery, target),
        Command::Scale { direction, count, fleet } => demo::scale(&direction, count, fleet),
        Command::Demo { config, requests, run_dir } => demo::demo(&config, requests, run_dir),
        Command::Report { trace, out, bucket_ms } => analysis::report(&trace, &out, bucket_ms),
        Command::Serve(args) => demo::serve(args),
        Command::Directory { bind } => demo::directory(bind),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("REPLICAST_LOG")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
