//! `stoqlab`: experiment harness over the stoqlab core library.
//!
//! Every subcommand writes one JSON report (stdout or `--out`) and optionally
//! a CSV projection (`--csv`). Exit codes: 0 accept or success, 1 reject or
//! violation found, 2 usage or instance error.

mod commands;
mod report;
#[path = "../../core/tests/criteria/mod.rs"]
#[allow(dead_code)]
mod criteria;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "stoqlab", version, about = "Stoquastic verifier experiments")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Master seed; required by Monte Carlo subcommands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::Float)]
    pub mode: Mode,
    /// JSON report path (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// CSV projection of the report.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Worker threads for parallel loops.
    #[arg(long, global = true, env = "STOQLAB_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Rational,
    Float,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Rational => "rational",
            Mode::Float => "float",
        }
    }
}

#[derive(Subcommand)]
pub enum Command {
    /// Validate and evaluate a reversible circuit.
    Circuit(commands::CircuitArgs),
    /// Acceptance probability of a verifier on a witness.
    Verify(commands::VerifyArgs),
    /// Separable value of a partitioned matrix.
    Sepval(commands::SepvalArgs),
    /// Compare hsep(A (x) B) with hsep(A) hsep(B).
    MultCheck(commands::MultCheckArgs),
    /// Build the product test and evaluate it on states.
    ProductTest(commands::ProductTestArgs),
    /// Length-efficient symmetrization of a verifier.
    Symmetrize(commands::SymmetrizeArgs),
    /// Prover compression or symmetric-to-plain reduction.
    Compress(commands::CompressArgs),
    /// Weak or strong conjunction of verifier copies.
    Repeat(commands::RepeatArgs),
    /// Uniformity and consistency protocol on a constraint graph.
    Np4(commands::Np4Args),
    /// Two-sample protocol on a constraint graph.
    Np5(commands::Np5Args),
    /// Monte Carlo birthday estimate.
    Birthday(commands::BirthdayArgs),
    /// Rectangular closure test.
    RectClosure(commands::RectClosureArgs),
    /// Sum-of-squares rounding loop on a moment oracle.
    SosRound(commands::SosRoundArgs),
    /// Clean connected component verifier.
    Cleancc(commands::CleanccArgs),
    /// Run the acceptance battery.
    Suite(commands::SuiteArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
