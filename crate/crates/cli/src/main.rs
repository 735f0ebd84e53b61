//! `kkt2`: certify optimality conditions at a given point of a problem file.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "kkt2",
    version,
    about = "First- and second-order optimality certificates"
)]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for every randomized search; overrides KKT2_SEED and the file seed.
    #[arg(long, global = true, env = "KKT2_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
struct Target {
    /// Problem file (JSON).
    file: PathBuf,
    /// Point file; builtins default to their base point.
    #[arg(long)]
    at: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stationarity: the multiplier set is nonempty, else the residual.
    CheckFoc(Target),
    /// Constraint qualifications; all of them when no flag is given.
    CheckCq {
        #[command(flatten)]
        target: Target,
        /// Radial-cone qualification.
        #[arg(long)]
        rzkcq: bool,
        /// Tangent-cone qualification.
        #[arg(long)]
        weaker: bool,
        /// Strict qualification at the point-file multiplier, else the center of the set.
        #[arg(long)]
        strict: bool,
    },
    /// Vertices of the multiplier set.
    Multipliers(Target),
    /// Second-order necessary condition.
    CheckSnc(Target),
    /// Second-order sufficient condition over the extended critical cone.
    CheckSsc {
        #[command(flatten)]
        target: Target,
        /// Slack in the objective cut of the critical cone.
        #[arg(long)]
        eta: f64,
        /// Required coercivity constant.
        #[arg(long)]
        alpha: f64,
    },
    /// Sample feasible points near the base point and test quadratic growth.
    Growth {
        #[command(flatten)]
        target: Target,
        /// Growth constant; 0 tests plain local minimality.
        #[arg(long)]
        alpha: f64,
        /// Sampling radius.
        #[arg(long)]
        eps: f64,
        /// Number of feasible points sampled.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Finite-difference check of the supplied derivatives.
    ValidateDerivatives(Target),
    /// Scripted certification of a builtin counterexample.
    Repro {
        #[command(subcommand)]
        which: Repro,
    },
    /// Re-verify the witnesses recorded in a JSON report.
    Replay {
        /// JSON report produced with `--format json`.
        report: PathBuf,
        #[command(flatten)]
        target: Target,
    },
}

#[derive(Debug, Subcommand)]
enum Repro {
    /// Non-unique multipliers on a grid of N cells.
    Example1 {
        /// Grid size; a positive multiple of 12.
        #[arg(long, default_value_t = 120)]
        grid: usize,
    },
    /// Convex hull in R^3 generated by two point sequences.
    Example2 {
        /// Generators kept per sequence; at least 2.
        #[arg(long, default_value_t = 8)]
        trunc: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(report) => {
            match cli.format {
                Format::Text => print!("{}", report.to_text()),
                Format::Json => println!("{}", report.to_json()),
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("kkt2: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
