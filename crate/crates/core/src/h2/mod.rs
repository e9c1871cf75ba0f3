//! H² data model: nested bases, coupling levels, dense leaves and the
//! marshaling of tree levels into batches.

mod basis;
mod batch;
mod blocks;
mod vector;

use nalgebra::DMatrix;

pub use basis::BasisTree;
pub use batch::{marshal_downsweep_level, marshal_tree_multiply_level, marshal_upsweep_level, BatchEntry, BatchPlan};
pub use blocks::{CouplingLevel, DenseLayer};
pub use vector::VectorTree;

use crate::construct::KernelSpec;
use crate::error::{structure, Result};
use crate::geometry::ClusterTree;

/// `A = A_dense + sum_l U^l S^l (V^l)^T` over a pair of cluster trees.
#[derive(Clone, Debug, PartialEq)]
pub struct H2Matrix {
    pub(crate) row_tree: ClusterTree,
    pub(crate) col_tree: ClusterTree,
    pub(crate) u: BasisTree,
    pub(crate) v: BasisTree,
    pub(crate) couplings: Vec<CouplingLevel>,
    pub(crate) dense: DenseLayer,
    pub(crate) eta: f64,
    pub(crate) kernel: Option<KernelSpec>,
}

/// Storage in bytes, split by part.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MemoryReport {
    pub dense_bytes: usize,
    pub basis_bytes: usize,
    pub coupling_bytes: usize,
    /// Bases, transfers and couplings.
    pub lowrank_bytes: usize,
    pub total_bytes: usize,
}

impl H2Matrix {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        row_tree: ClusterTree,
        col_tree: ClusterTree,
        u: BasisTree,
        v: BasisTree,
        couplings: Vec<CouplingLevel>,
        dense: DenseLayer,
        eta: f64,
        kernel: Option<KernelSpec>,
    ) -> Result<Self> {
        let m = H2Matrix { row_tree, col_tree, u, v, couplings, dense, eta, kernel };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.row_tree.depth();
        if self.col_tree.depth() != q || self.u.depth != q || self.v.depth != q || self.couplings.len() != q + 1 {
            return structure("trees, bases and coupling levels disagree on the depth");
        }
        self.u.validate()?;
        self.v.validate()?;
        for (tree, basis) in [(&self.row_tree, &self.u), (&self.col_tree, &self.v)] {
            if basis.leaf_begin[0] != 0 || basis.leaf_begin.iter().skip(1).zip(tree.leaves()).any(|(&b, leaf)| b != leaf.end) {
                return structure("basis leaves do not follow the cluster tree");
            }
        }
        for (l, c) in self.couplings.iter().enumerate() {
            if c.rows() != 1 << l || c.rank_rows != self.u.ranks[l] || c.rank_cols != self.v.ranks[l] {
                return structure(format!("coupling level {l} does not match the basis ranks"));
            }
            c.validate(1 << l)?;
        }
        if self.dense.rows() != 1 << q {
            return structure("dense layer does not have one block row per leaf");
        }
        self.dense.validate(|t| self.row_tree.node(q, t).len(), |s| self.col_tree.node(q, s).len())
    }

    pub fn rows(&self) -> usize {
        self.row_tree.len()
    }

    pub fn cols(&self) -> usize {
        self.col_tree.len()
    }

    pub fn depth(&self) -> usize {
        self.row_tree.depth()
    }

    pub fn row_tree(&self) -> &ClusterTree {
        &self.row_tree
    }

    pub fn col_tree(&self) -> &ClusterTree {
        &self.col_tree
    }

    pub fn row_basis(&self) -> &BasisTree {
        &self.u
    }

    pub fn col_basis(&self) -> &BasisTree {
        &self.v
    }

    pub fn couplings(&self) -> &[CouplingLevel] {
        &self.couplings
    }

    pub fn coupling(&self, level: usize) -> &CouplingLevel {
        &self.couplings[level]
    }

    pub fn dense(&self) -> &DenseLayer {
        &self.dense
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn kernel(&self) -> Option<KernelSpec> {
        self.kernel
    }

    /// Mutable access to every stored block; the block structure itself
    /// stays fixed.
    pub fn parts_mut(&mut self) -> (&mut BasisTree, &mut BasisTree, &mut [CouplingLevel], &mut DenseLayer) {
        (&mut self.u, &mut self.v, &mut self.couplings, &mut self.dense)
    }

    pub fn row_ranks(&self) -> &[usize] {
        &self.u.ranks
    }

    pub fn col_ranks(&self) -> &[usize] {
        &self.v.ranks
    }

    pub fn lowrank_count(&self) -> usize {
        self.couplings.iter().map(CouplingLevel::len).sum()
    }

    /// Largest number of blocks (low-rank, and dense on the leaf level) in a
    /// block row of any level.
    pub fn sparsity_constant(&self) -> usize {
        let q = self.depth();
        (0..=q)
            .map(|l| {
                let c = &self.couplings[l];
                (0..c.rows())
                    .map(|t| c.row(t).len() + if l == q { self.dense.row(t).len() } else { 0 })
                    .max()
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    pub fn memory_report(&self) -> MemoryReport {
        let w = std::mem::size_of::<f64>();
        let dense_bytes = self.dense.data.len() * w;
        let basis_bytes = (self.u.stored_len() + self.v.stored_len()) * w;
        let coupling_bytes = self.couplings.iter().map(|c| c.data.len()).sum::<usize>() * w;
        let lowrank_bytes = basis_bytes + coupling_bytes;
        MemoryReport { dense_bytes, basis_bytes, coupling_bytes, lowrank_bytes, total_bytes: dense_bytes + lowrank_bytes }
    }

    /// Floating point operations of one product with `nv` vectors, counting
    /// a multiply-add as two.
    pub fn matvec_flops(&self, nv: usize) -> u64 {
        let q = self.depth();
        let mut f = 0u64;
        let leaf_prod = |b: &BasisTree| -> u64 {
            (0..b.leaf_count()).map(|i| 2 * (b.leaf_rows(i) * b.ranks[q] * nv) as u64).sum()
        };
        let transfers = |b: &BasisTree| -> u64 {
            (1..=q).map(|l| (1u64 << l) * 2 * (b.transfer_len(l) * nv) as u64).sum()
        };
        f += leaf_prod(&self.v) + transfers(&self.v);
        f += leaf_prod(&self.u) + transfers(&self.u);
        for c in &self.couplings {
            f += (c.len() * 2 * c.block_len() * nv) as u64;
        }
        f += 2 * (self.dense.data.len() * nv) as u64;
        f
    }

    /// Overwrites every stored block with uniform random values from
    /// `[-1, 1)`, keeping the structure. Used to exercise the algorithms on
    /// bases without special structure.
    pub fn randomize(&mut self, seed: u64) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        for b in [&mut self.u, &mut self.v] {
            fill(&mut b.leaves);
            b.transfers.iter_mut().for_each(|t| fill(t));
        }
        self.couplings.iter_mut().for_each(|c| fill(&mut c.data));
        fill(&mut self.dense.data);
    }

    /// Explicit matrix in tree ordering. Meant for small checks only.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let q = self.depth();
        let mut a = DMatrix::zeros(self.rows(), self.cols());
        let expand_all = |b: &BasisTree| -> Vec<Vec<DMatrix<f64>>> {
            (0..=q).map(|l| (0..1usize << l).map(|i| b.expand(l, i)).collect()).collect()
        };
        let (ue, ve) = (expand_all(&self.u), expand_all(&self.v));
        for (l, c) in self.couplings.iter().enumerate() {
            for t in 0..c.rows() {
                for b in c.row(t) {
                    let s = c.cols[b];
                    let blk = &ue[l][t] * c.block(b).to_dmatrix() * ve[l][s].transpose();
                    let (tn, sn) = (self.row_tree.node(l, t), self.col_tree.node(l, s));
                    a.view_mut((tn.begin, sn.begin), (tn.len(), sn.len())).copy_from(&blk);
                }
            }
        }
        for t in 0..self.dense.rows() {
            let tn = self.row_tree.node(q, t);
            for b in self.dense.row(t) {
                let sn = self.col_tree.node(q, self.dense.cols[b]);
                let blk = self.dense.block(b, tn.len(), sn.len()).to_dmatrix();
                a.view_mut((tn.begin, sn.begin), (tn.len(), sn.len())).copy_from(&blk);
            }
        }
        a
    }
}
