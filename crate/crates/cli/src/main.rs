//! `icokit`: validate process matrices, test parity erasure, contract local
//! operations through a process, and explore the two-bit causal polytope.
//!
//! Exit codes: 0 accepted, 1 checked and rejected, 2 malformed input,
//! 3 enumeration scale cap exceeded.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::exit;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use icokit::{Error, DEFAULT_TOL};

use commands::{ExploreMode, Method};

#[derive(Parser)]
#[command(name = "icokit", version, about)]
struct Cli {
    /// Residual tolerance for verdicts.
    #[arg(long, global = true, env = "ICOKIT_TOL")]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a process-matrix JSON file against the validity conditions.
    Validate { path: PathBuf },
    /// Decide whether a channel erases every party subset's input parity.
    Parity {
        path: PathBuf,
        #[command(flatten)]
        kind: ParityKind,
        /// Quantum checker selection.
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
    },
    /// Contract one local operation per party through a process and
    /// cross-check the insertion recursion against direct pairing.
    Apply {
        process: PathBuf,
        /// Local operation files, party inferred from their labels.
        #[arg(required = true)]
        ops: Vec<PathBuf>,
        /// Insertion order as comma-separated party numbers.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
    },
    /// Enumerate and test the polytope of two-party bit channels.
    Explore {
        #[command(flatten)]
        mode: ExploreFlags,
        /// Write the CSV or certificate artifact to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ParityKind {
    /// Input is a classical probability table.
    #[arg(long)]
    classical: bool,
    /// Input is the Choi matrix of a quantum channel.
    #[arg(long)]
    quantum: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ExploreFlags {
    /// Census of deterministic two-bit parity-erasure channels.
    #[arg(long)]
    two_bit_census: bool,
    /// Exact vertices of the parity-erasure polytope.
    #[arg(long)]
    vertices: bool,
    /// Causal-separability membership LP on a classical table file.
    #[arg(long)]
    lp: Option<PathBuf>,
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::ScaleCap(_) => 3,
        Error::NotParityErasure { .. }
        | Error::NoInfluenceViolated { .. }
        | Error::DecompositionFailed(_) => 1,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    let tol = cli.tol.unwrap_or(DEFAULT_TOL);
    let started = Instant::now();
    let outcome = match &cli.command {
        Command::Validate { path } => commands::cmd_validate(path, tol),
        Command::Parity { path, kind, method } => {
            if kind.classical && *method != Method::Both {
                Err(Error::Malformed(
                    "--method selects the quantum checker; drop it with --classical".into(),
                ))
            } else if kind.classical {
                commands::cmd_parity_classical(path, tol)
            } else {
                commands::cmd_parity_quantum(path, *method, tol)
            }
        }
        Command::Apply { process, ops, order } => {
            commands::cmd_apply(process, ops, order.as_deref(), tol)
        }
        Command::Explore { mode, out } => {
            let mode = if mode.two_bit_census {
                ExploreMode::Census
            } else if mode.vertices {
                ExploreMode::Vertices
            } else {
                ExploreMode::Lp(mode.lp.clone().expect("group requires one flag"))
            };
            commands::cmd_explore(&mode, out.as_deref(), tol)
        }
    };
    match outcome {
        Ok(mut report) => {
            report.wall_time_s = started.elapsed().as_secs_f64();
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            exit(if report.accepted() { 0 } else { 1 });
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit(exit_code_for(&e));
        }
    }
}
