//! `dps`: membership tests, robustness and fidelity bounds, separable
//! decompositions and the Datta-family experiment drivers.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Serialize)]
#[command(name = "dps", version, about = "Outer and inner SDP hierarchies for bipartite separability")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Serialize, Clone)]
pub struct Global {
    /// Solver tolerance for gaps and residuals.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// INSIDE/OUTSIDE verdicts need a margin of this many tolerances.
    #[arg(long, global = true, default_value_t = 10.0)]
    pub margin_factor: f64,
    /// Worker threads for scans (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "dps-out")]
    pub output_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SideArg {
    Inner,
    Outer,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum CutArg {
    #[value(name = "12|3")]
    #[serde(rename = "12|3")]
    Cut12_3,
    #[value(name = "1|23")]
    #[serde(rename = "1|23")]
    Cut1_23,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Bell,
    Isotropic,
    Werner,
    ProductRandom,
    DattaSwap,
    DattaHaar,
}

#[derive(Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Perturbation strength of the PPT inner level, with its large-N asymptotic.
    Epsilon {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
    },
    /// Membership of a state in an outer or inner set.
    Membership {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ppt: bool,
        #[arg(long)]
        inner: bool,
    },
    /// Lower (outer) or upper (inner) bound on the robustness of entanglement.
    Robustness {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ppt: bool,
        #[arg(long, value_enum)]
        side: SideArg,
    },
    /// Inner fidelity bounds for a state-estimation ensemble.
    Fidelity {
        /// Ensemble JSON: {"members": [{"p", "psiPrime": {re, im}, "psi": {re, im}}]}.
        #[arg(long, required_unless_present = "qubit_two_design")]
        ensemble: Option<PathBuf>,
        /// Use the six Pauli eigenstates instead of a file, with this many copies on A.
        #[arg(long, conflicts_with = "ensemble")]
        qubit_two_design: Option<usize>,
        /// Levels, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        n: Vec<usize>,
        #[arg(long)]
        ppt: bool,
        /// Also solve the outer N=1 PPT relaxation (exact for dA dB <= 6).
        #[arg(long)]
        outer_reference: bool,
        /// Write the measure-and-prepare strategy of the highest level here.
        #[arg(long)]
        emit_strategy: Option<PathBuf>,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
    },
    /// Certify a state through an inner level and sample its separable decomposition.
    Decompose {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        ppt: bool,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Robustness bounds of the SWAP Datta state over an alpha grid, cut 12|3.
    DattaScan {
        #[arg(long, default_value_t = 0.0)]
        alpha_start: f64,
        #[arg(long, default_value_t = 0.9)]
        alpha_stop: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha_step: f64,
        /// Level of the outer PPT lower bound.
        #[arg(long, default_value_t = 3)]
        n_lower: usize,
        /// Level of the inner upper bound.
        #[arg(long, default_value_t = 3)]
        n_upper: usize,
        /// Also compute the inner bound at N=15.
        #[arg(long)]
        with_n15: bool,
    },
    /// Inner membership of Datta states built from seeded Haar unitaries.
    RandomSweep {
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long)]
        ppt: bool,
        /// Append the SWAP instance to the sampled unitaries.
        #[arg(long)]
        include_swap: bool,
    },
    /// Write a state file.
    MakeState {
        #[arg(long, value_enum)]
        kind: StateKind,
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// Mixing weight for isotropic and Werner states.
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_enum, default_value = "12|3")]
        cut: CutArg,
        #[arg(long)]
        out: PathBuf,
    },
}

/// How a finished command maps to an exit code.
pub enum Status {
    Ok,
    Indeterminate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Indeterminate) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
