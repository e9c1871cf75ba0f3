//! `h2kit` command-line driver.
//!
//! Exit status: 0 on success, 1 when a `--check` fails, 2 on usage and
//! runtime errors.

mod commands;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "h2kit", version, about = "Build, multiply, compress and distribute H2 matrices")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random quantity (test vectors, sampled rows).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the result table to this CSV file.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Exit with status 1 when the command's accuracy check fails.
    #[arg(long, global = true)]
    pub check: bool,
    /// Leave timing columns empty so that reruns give identical files.
    #[arg(long, global = true)]
    pub no_timings: bool,
    /// Largest size compared against dense kernel rows.
    #[arg(long, global = true, default_value_t = 4096)]
    pub oracle_cap: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    Exp2d,
    Exp3d,
    FdFrac,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FieldName {
    Bump,
    Constant,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum PrecondName {
    /// V-cycle on h^2 C.
    Mg,
    /// V-cycle on h^2 (diag(D) + C).
    MgDiag,
    Jacobi,
    None,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Construct an H2 matrix and save it.
    Build {
        #[arg(long, value_enum)]
        kernel: KernelName,
        /// Number of points (a square for fd-frac).
        #[arg(long)]
        n: usize,
        /// Leaf size.
        #[arg(long, default_value_t = 64)]
        m: usize,
        #[arg(long, default_value_t = 0.9)]
        eta: f64,
        /// Chebyshev points per axis.
        #[arg(long, default_value_t = 6)]
        p: usize,
        /// Correlation length of the exponential kernels, relative to the
        /// unit side.
        #[arg(long, default_value_t = 0.1)]
        length: f64,
        #[arg(long, default_value_t = 0.75)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = FieldName::Bump)]
        field: FieldName,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the structure of a saved matrix.
    Inspect {
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Time products with a saved matrix.
    Matvec {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1)]
        nv: usize,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        /// Largest sampled relative error accepted by `--check`.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Recompress a saved matrix.
    Compress {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Largest sampled difference accepted by `--check`.
        #[arg(long, default_value_t = 5e-3)]
        tol: f64,
    },
    /// Product on simulated ranks, compared with the single-rank product.
    DistMatvec {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 4)]
        ranks: usize,
        #[arg(long, default_value_t = 1)]
        nv: usize,
    },
    /// Recompression on simulated ranks, compared with the single-rank one.
    DistCompress {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 4)]
        ranks: usize,
        #[arg(long, default_value_t = 1e-3)]
        tau: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fractional diffusion solve on an n x n grid.
    SolveFd {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 0.75)]
        beta: f64,
        /// Recompression threshold for K; 0 skips recompression.
        #[arg(long, default_value_t = 1e-6)]
        tau: f64,
        #[arg(long, default_value_t = 4)]
        ranks: usize,
        #[arg(long, default_value_t = 1e-8)]
        rtol: f64,
        #[arg(long, default_value_t = 500)]
        maxit: usize,
        #[arg(long, value_enum, default_value_t = PrecondName::Mg)]
        precond: PrecondName,
        /// Factor on the correction C (default: self-cell factor).
        #[arg(long)]
        c_scale: Option<f64>,
        #[arg(long, value_enum, default_value_t = FieldName::Bump)]
        field: FieldName,
        #[arg(long, default_value_t = 0.7)]
        eta: f64,
        #[arg(long, default_value_t = 6)]
        p: usize,
    },
}

/// How a command ended when it did not fail outright.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    CheckFailed(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
