use std::ops::Range;

use super::mg::Multigrid;
use super::pcg::{pcg, KrylovOps, PcgResult};
use super::stencil::{diagonal, SparseCorrection};
use super::FracProblem;
use crate::dist::{kind, mirror_sends, rank_matvec, run, tag, Comm, DistributedH2, ExchangePlan, Trace, MASTER};
use crate::error::{structure, H2Error, Result};
use crate::matvec::random_vectors;

/// Operator the multigrid V-cycle is built on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgOperator {
    /// `h^2 C`.
    Correction,
    /// `h^2 (diag(D) + C)`.
    DiagPlusCorrection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
    Multigrid(MgOperator),
}

enum Prec {
    None,
    Jacobi(Vec<f64>),
    Multigrid(Multigrid),
}

/// Rows of `C` and `D` owned by one rank. Column ids of `c_idx` index the
/// local rows followed by the ghost values listed in `plan.nodes`; entries
/// keep the column order of the grid-ordered `C` so that row sums do not
/// depend on the partition.
struct LocalRows {
    rows: Range<usize>,
    d: Vec<f64>,
    c_ptr: Vec<usize>,
    c_idx: Vec<usize>,
    c_val: Vec<f64>,
    plan: ExchangePlan,
}

impl LocalRows {
    fn spmv(&self, ext: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let r = self.c_ptr[i]..self.c_ptr[i + 1];
            *yi = self.c_idx[r.clone()].iter().zip(&self.c_val[r]).map(|(&j, v)| v * ext[j]).sum();
        }
    }
}

/// `h^2 (D + K + C)` split over the ranks of `K`. Vectors passed in and out
/// are in grid order; inside the runtime everything is in the tree order of
/// `K`.
pub struct FdSystem {
    problem: FracProblem,
    k: DistributedH2,
    /// Tree position to grid index.
    perm: Vec<usize>,
    local: Vec<LocalRows>,
    prec: Prec,
}

/// Result of [`FdSystem::solve`]; `pcg.u` is in grid order.
#[derive(Clone, Debug)]
pub struct FdSolution {
    pub pcg: PcgResult,
    /// Smallest `v^T A v / v^T v` over the random probes (infinite if none).
    pub min_probe: f64,
    pub trace: Trace,
}

fn owner_of(starts: &[usize], j: usize) -> usize {
    starts.partition_point(|&s| s <= j) - 1
}

impl FdSystem {
    /// `d` and `c` are in grid order.
    pub fn new(problem: FracProblem, k: DistributedH2, d: Vec<f64>, c: SparseCorrection, precond: Preconditioner) -> Result<Self> {
        let n = problem.size();
        if k.rows() != n || k.cols() != n || d.len() != n || c.rows() != n || c.cols() != n {
            return structure(format!("system parts do not match {n} unknowns"));
        }
        let perm = k.row_tree().permutation().to_vec();
        let mut pos = vec![0; n];
        for (i, &g) in perm.iter().enumerate() {
            pos[g] = i;
        }
        let starts: Vec<usize> = k.branches().iter().map(|b| b.rows.start).collect();
        let mut local = Vec::with_capacity(k.nranks());
        let mut plans = Vec::with_capacity(k.nranks());
        for br in k.branches() {
            let rows = br.rows.clone();
            let ghosts = rows.clone().flat_map(|i| c.outer_view(perm[i]).into_iter().flat_map(|r| r.indices().to_vec())).map(|g| pos[g]);
            let plan = ExchangePlan::from_columns(ghosts.filter(|j| !rows.contains(j)), |j| owner_of(&starts, j));
            let nloc = rows.len();
            let (mut c_ptr, mut c_idx, mut c_val) = (vec![0], Vec::new(), Vec::new());
            for i in rows.clone() {
                if let Some(row) = c.outer_view(perm[i]) {
                    for (g, &v) in row.iter() {
                        let j = pos[g];
                        c_idx.push(if rows.contains(&j) { j - rows.start } else { nloc + plan.position(j).unwrap_or(usize::MAX) });
                        c_val.push(v);
                    }
                }
                c_ptr.push(c_idx.len());
            }
            plans.push(plan);
            let d = rows.clone().map(|i| d[perm[i]]).collect();
            local.push(LocalRows { rows, d, c_ptr, c_idx, c_val, plan: ExchangePlan::default() });
        }
        mirror_sends(&mut plans);
        for (l, plan) in local.iter_mut().zip(plans) {
            l.plan = plan;
        }

        let h2 = problem.h() * problem.h();
        let prec = match precond {
            Preconditioner::None => Prec::None,
            Preconditioner::Jacobi => {
                let cd = diagonal(&c);
                Prec::Jacobi(perm.iter().map(|&g| 1.0 / (h2 * (d[g] + cd[g]))).collect())
            }
            Preconditioner::Multigrid(op) => {
                let mut a = c.map(|v| h2 * v);
                if op == MgOperator::DiagPlusCorrection {
                    for (g, &dg) in d.iter().enumerate() {
                        if let Some(v) = a.get_mut(g, g) {
                            *v += h2 * dg;
                        }
                    }
                }
                Prec::Multigrid(Multigrid::new(a, problem.n)?)
            }
        };
        Ok(FdSystem { problem, k, perm, local, prec })
    }

    pub fn problem(&self) -> &FracProblem {
        &self.problem
    }

    pub fn k(&self) -> &DistributedH2 {
        &self.k
    }

    pub fn nranks(&self) -> usize {
        self.k.nranks()
    }

    fn to_tree(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&g| x[g]).collect()
    }

    fn to_grid(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (i, &g) in self.perm.iter().enumerate() {
            out[g] = x[i];
        }
        out
    }

    fn gather_grid(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        self.to_grid(&parts.concat())
    }

    /// `A x` for a grid-ordered `x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.problem.size() {
            return structure(format!("vector of length {} for {} unknowns", x.len(), self.problem.size()));
        }
        let xt = self.to_tree(x);
        let (parts, _) = run(self.nranks(), |comm| {
            let rows = self.local[comm.rank()].rows.clone();
            let mut ops = RankOps { sys: self, comm };
            let mut y = vec![0.0; rows.len()];
            ops.apply(&xt[rows], &mut y)?;
            Ok(y)
        })?;
        Ok(self.gather_grid(parts))
    }

    /// Preconditioner applied to a grid-ordered `r`.
    pub fn precondition(&self, r: &[f64]) -> Result<Vec<f64>> {
        let rt = self.to_tree(r);
        let (parts, _) = run(self.nranks(), |comm| {
            let rows = self.local[comm.rank()].rows.clone();
            let mut z = vec![0.0; rows.len()];
            RankOps { sys: self, comm }.precondition(&rt[rows], &mut z)?;
            Ok(z)
        })?;
        Ok(self.gather_grid(parts))
    }

    /// Right-hand side `b = 1`. Runs `probes` random positivity checks
    /// `v^T A v > 0` before iterating.
    pub fn solve(&self, rtol: f64, maxit: usize, probes: usize, seed: u64) -> Result<FdSolution> {
        let n = self.problem.size();
        let b = self.problem.rhs();
        let (mut out, trace) = run(self.nranks(), |comm| {
            let rows = self.local[comm.rank()].rows.clone();
            let mut ops = RankOps { sys: self, comm };
            let mut min_probe = f64::INFINITY;
            let mut y = vec![0.0; rows.len()];
            for i in 0..probes {
                let v: Vec<f64> = random_vectors(n, 1, seed.wrapping_add(i as u64))[rows.clone()].iter().map(|u| 2.0 * u - 1.0).collect();
                let v = &v[..];
                ops.apply(v, &mut y)?;
                let ratio = ops.dot(v, &y)? / ops.dot(v, v)?;
                if !(ratio > 0.0) {
                    return Err(H2Error::Precondition(format!("probe {i}: v^T A v / v^T v = {ratio:e}")));
                }
                min_probe = min_probe.min(ratio);
            }
            ops.comm.phase("probed");
            let res = pcg(&mut ops, &b[rows], rtol, maxit)?;
            ops.comm.phase("solved");
            Ok((res, min_probe))
        })?;
        let parts = out.iter_mut().map(|(r, _)| std::mem::take(&mut r.u)).collect();
        let (mut pcg, min_probe) = out.swap_remove(0);
        pcg.u = self.gather_grid(parts);
        Ok(FdSolution { pcg, min_probe, trace })
    }
}

struct RankOps<'s, 'c, 'a> {
    sys: &'s FdSystem,
    comm: &'c mut Comm<'a>,
}

impl KrylovOps for RankOps<'_, '_, '_> {
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let lr = &self.sys.local[self.comm.rank()];
        let plan = &lr.plan;
        for (i, &dst) in plan.send_pid.iter().enumerate() {
            let payload = plan.send_segment(i).iter().map(|&j| x[j - lr.rows.start]).collect();
            self.comm.isend(dst, tag(kind::HALO, 0), payload)?;
        }
        let handles: Vec<_> = plan.pid.iter().map(|&src| self.comm.irecv(src, tag(kind::HALO, 0))).collect();
        let mut kx = vec![0.0; x.len()];
        rank_matvec(&self.sys.k, self.comm, x, 1, 1.0, 0.0, &mut kx)?;
        let mut ext = x.to_vec();
        for part in self.comm.wait_all(&handles)? {
            ext.extend(part);
        }
        if ext.len() != x.len() + plan.nodes.len() {
            return structure(format!("rank {}: halo delivered {} values", self.comm.rank(), ext.len() - x.len()));
        }
        let mut cx = vec![0.0; x.len()];
        lr.spmv(&ext, &mut cx);
        let h2 = self.sys.problem.h() * self.sys.problem.h();
        for i in 0..x.len() {
            y[i] = h2 * ((lr.d[i] * x[i] + kx[i]) + cx[i]);
        }
        Ok(())
    }

    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        let rows = self.sys.local[self.comm.rank()].rows.clone();
        match &self.sys.prec {
            Prec::None => z.copy_from_slice(r),
            Prec::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(&inv[rows]) {
                    *zi = ri * di;
                }
            }
            Prec::Multigrid(mg) => {
                let gathered = self.comm.gather(MASTER, tag(kind::VECTOR, 0), r.to_vec())?;
                let parts = gathered.map(|g| {
                    let zt = self.sys.to_tree(&mg.vcycle(&self.sys.gather_grid(g)));
                    self.sys.local.iter().map(|l| zt[l.rows.clone()].to_vec()).collect()
                });
                let mine = self.comm.scatter(MASTER, tag(kind::VECTOR, 1), parts)?;
                z.copy_from_slice(&mine);
            }
        }
        Ok(())
    }

    fn dot(&mut self, a: &[f64], b: &[f64]) -> Result<f64> {
        let part: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        Ok(self.comm.allreduce_sum(tag(kind::REDUCE, 0), vec![part])?[0])
    }
}
