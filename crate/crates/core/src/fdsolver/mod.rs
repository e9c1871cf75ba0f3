//! Integral fractional diffusion on the unit square with variable
//! diffusivity: `h^2 (D + K + C) u = b`, with `K` a distributed H² matrix,
//! `D` the row sums of an auxiliary H² matrix over the extended box, `C` a
//! 5-point correction, solved by CG with a multigrid preconditioner.

mod mg;
mod pcg;
mod problem;
mod stencil;
mod system;

use std::time::{Duration, Instant};

pub use mg::{prolongation, Multigrid, COARSEST_SIDE};
pub use pcg::{identity, pcg, FnOps, KrylovOps, PcgResult};
pub use problem::{assemble_d, assemble_k, self_cell_factor, FracProblem};
pub use stencil::{assemble_c, diagonal, spmv, SparseCorrection};
pub use system::{FdSolution, FdSystem, MgOperator, Preconditioner};

use crate::basisops::CompressOptions;
use crate::dist::dist_compress_with;
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdConfig {
    /// Leaf size of `K`.
    pub leaf_size: usize,
    /// Interior points per row leaf of the auxiliary matrix.
    pub aux_leaf_size: usize,
    pub eta: f64,
    pub p: usize,
    /// Recompression threshold for `K`; `None` skips recompression.
    pub tau: Option<f64>,
    pub ranks: usize,
    pub rtol: f64,
    pub maxit: usize,
    pub preconditioner: Preconditioner,
    pub probes: usize,
    pub seed: u64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig {
            leaf_size: 64,
            aux_leaf_size: 32,
            eta: 0.7,
            p: 6,
            tau: Some(1e-6),
            ranks: 4,
            rtol: 1e-8,
            maxit: 500,
            preconditioner: Preconditioner::Multigrid(MgOperator::Correction),
            probes: 4,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SetupTimes {
    pub k_build: Duration,
    pub compression: Duration,
    pub d_assembly: Duration,
    pub c_assembly: Duration,
    pub preconditioner: Duration,
}

impl SetupTimes {
    pub fn total(&self) -> Duration {
        self.k_build + self.compression + self.d_assembly + self.c_assembly + self.preconditioner
    }
}

#[derive(Clone, Debug)]
pub struct FdReport {
    pub problem: FracProblem,
    pub config: FdConfig,
    pub setup: SetupTimes,
    pub solve: Duration,
    pub solution: FdSolution,
    /// Level ranks of the row basis of `K` after recompression.
    pub k_ranks: Vec<usize>,
}

impl FdReport {
    pub fn iterations(&self) -> usize {
        self.solution.pcg.iterations
    }

    pub fn time_per_iteration(&self) -> Duration {
        self.solve.checked_div(self.iterations().max(1) as u32).unwrap_or_default()
    }
}

/// Assembles the system, builds the preconditioner and runs PCG.
pub fn solve_fd(problem: &FracProblem, cfg: &FdConfig) -> Result<FdReport> {
    let mut setup = SetupTimes::default();

    // D first: the auxiliary matrix is the largest object and is dropped
    // before K is built
    let t = Instant::now();
    let d = assemble_d(problem, cfg.aux_leaf_size, cfg.eta, cfg.p)?;
    setup.d_assembly = t.elapsed();

    let t = Instant::now();
    let mut k = assemble_k(problem, cfg.leaf_size, cfg.eta, cfg.p, cfg.ranks)?;
    setup.k_build = t.elapsed();

    if let Some(tau) = cfg.tau {
        let t = Instant::now();
        k = dist_compress_with(&k, CompressOptions::new(tau))?.0;
        setup.compression = t.elapsed();
    }
    let k_ranks = k.branch(0).u.ranks.clone();

    let t = Instant::now();
    let c = assemble_c(problem);
    setup.c_assembly = t.elapsed();

    let t = Instant::now();
    let system = FdSystem::new(*problem, k, d, c, cfg.preconditioner)?;
    setup.preconditioner = t.elapsed();

    let t = Instant::now();
    let solution = system.solve(cfg.rtol, cfg.maxit, cfg.probes, cfg.seed)?;
    let solve = t.elapsed();
    Ok(FdReport { problem: *problem, config: *cfg, setup, solve, solution, k_ranks })
}
