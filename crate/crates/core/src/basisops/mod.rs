//! Basis orthogonalization and algebraic recompression.
//!
//! The tree passes are split into a leaf stage, a stage over the upper
//! levels, and a final padding step. The distributed code runs the same
//! stages on branch and root trees and gets bitwise the same numbers.

mod kernels;

use nalgebra::DMatrix;

pub use kernels::{
    leaf_active, orth_leaf, orth_pair, pad_to, retained_rank, reweigh_node, truncate_leaf, truncate_pair, Truncation,
};

use crate::error::{structure, H2Error, Result};
use crate::h2::{BasisTree, CouplingLevel, H2Matrix};

/// One small matrix per node, stored per level.
pub type NodeFactors = Vec<Vec<DMatrix<f64>>>;

/// Number of leading orthonormal columns per node; the others are zero.
pub type ActiveCounts = Vec<Vec<usize>>;

/// Tolerance of the orthogonality test run before compression.
pub const ORTH_TOL: f64 = 1e-10;

/// Max-norm distance of a Gram matrix from the nearest diagonal matrix with
/// ones and zeros on the diagonal (zero columns come from padding).
pub fn gram_defect(g: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let v = g[(i, j)];
            let d = if i != j { v.abs() } else { v.abs().min((v - 1.0).abs()) };
            worst = worst.max(d);
        }
    }
    worst
}

/// Largest [`gram_defect`] over every node of `b`.
pub fn orthogonality_defect(b: &BasisTree) -> f64 {
    b.gram().iter().flatten().map(gram_defect).fold(0.0, f64::max)
}

pub fn is_orthogonal(b: &BasisTree, tol: f64) -> bool {
    orthogonality_defect(b) <= tol
}

fn leaf_matrix(b: &BasisTree, i: usize) -> DMatrix<f64> {
    b.leaf(i).to_dmatrix()
}

fn transfer_matrix(b: &BasisTree, l: usize, i: usize) -> DMatrix<f64> {
    b.transfer(l, i).to_dmatrix()
}

/// Leaf stage of the orthogonalization: QR of every leaf, written back in
/// place. Returns the `R` factors and active counts of the leaves.
pub fn orthogonalize_leaves(b: &mut BasisTree) -> (Vec<DMatrix<f64>>, Vec<usize>) {
    let q = b.depth;
    let mut r = Vec::with_capacity(b.leaf_count());
    let mut n = Vec::with_capacity(b.leaf_count());
    for i in 0..b.leaf_count() {
        let (qm, rm) = orth_leaf(&leaf_matrix(b, i));
        b.leaf_mut(i).copy_from_slice(qm.as_slice());
        r.push(rm);
        n.push(leaf_active(b.leaf_rows(i), b.ranks[q]));
    }
    (r, n)
}

/// Transfer stage: given the factors of the bottom level, rewrites the
/// transfers of levels `depth..=1` and returns the factors of every level.
pub fn orthogonalize_transfers(b: &mut BasisTree, bottom: Vec<DMatrix<f64>>, counts: Vec<usize>) -> (NodeFactors, ActiveCounts) {
    let q = b.depth;
    let mut r: NodeFactors = vec![Vec::new(); q + 1];
    let mut n: ActiveCounts = vec![Vec::new(); q + 1];
    r[q] = bottom;
    n[q] = counts;
    for l in (1..=q).rev() {
        let mut parents = Vec::with_capacity(1 << (l - 1));
        let mut active = Vec::with_capacity(1 << (l - 1));
        for i in 0..1usize << (l - 1) {
            let (c1, c2) = (2 * i, 2 * i + 1);
            let (e1, e2, rp, np) =
                orth_pair(&r[l][c1], &transfer_matrix(b, l, c1), n[l][c1], &r[l][c2], &transfer_matrix(b, l, c2), n[l][c2]);
            b.transfer_mut(l, c1).copy_from_slice(e1.as_slice());
            b.transfer_mut(l, c2).copy_from_slice(e2.as_slice());
            parents.push(rp);
            active.push(np);
        }
        r[l - 1] = parents;
        n[l - 1] = active;
    }
    (r, n)
}

/// Replaces `b` by an orthonormal nested basis spanning the same spaces and
/// returns the factors `R` with `B_old = B_new R` on every node.
pub fn orthogonalize_basis(b: &mut BasisTree) -> (NodeFactors, ActiveCounts) {
    let (r, n) = orthogonalize_leaves(b);
    orthogonalize_transfers(b, r, n)
}

/// `S_ts <- Ru_t S_ts Rv_s^T` for one block.
pub fn apply_factors_block(ru: &DMatrix<f64>, s: &mut [f64], rv: &DMatrix<f64>) {
    let blk = DMatrix::from_column_slice(ru.ncols(), rv.ncols(), s);
    let new = ru * blk * rv.transpose();
    s.copy_from_slice(new.as_slice());
}

fn apply_factors(couplings: &mut [CouplingLevel], ru: &NodeFactors, rv: &NodeFactors) {
    for (l, c) in couplings.iter_mut().enumerate() {
        for t in 0..c.rows() {
            for b in c.row(t) {
                let s = c.cols[b];
                apply_factors_block(&ru[l][t], c.block_mut(b), &rv[l][s]);
            }
        }
    }
}

/// Orthogonalizes both bases and folds the factors into the couplings; the
/// represented matrix is unchanged up to rounding.
pub fn orthogonalize(a: &mut H2Matrix) {
    let shared = a.u == a.v;
    let (ru, _) = orthogonalize_basis(&mut a.u);
    let rv = if shared {
        a.v = a.u.clone();
        ru.clone()
    } else {
        orthogonalize_basis(&mut a.v).0
    };
    apply_factors(&mut a.couplings, &ru, &rv);
}

/// Block column index of a coupling level: for every column node the
/// `(row, block)` pairs in ascending row order.
pub fn column_index(c: &CouplingLevel, col_nodes: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); col_nodes];
    for t in 0..c.rows() {
        for b in c.row(t) {
            out[c.cols[b]].push((t, b));
        }
    }
    out
}

fn block(c: &CouplingLevel, b: usize) -> DMatrix<f64> {
    c.block(b).to_dmatrix()
}

/// Reweighing factors of the row basis. `R_t^T R_t` is the Gram matrix of
/// the coefficients multiplying `U_t` in the whole block row of `t`,
/// including the parts inherited from ancestors.
pub fn reweigh_rows(a: &H2Matrix) -> Result<NodeFactors> {
    if !is_orthogonal(&a.v, ORTH_TOL) {
        return Err(H2Error::Precondition("column basis is not orthogonal".into()));
    }
    Ok(reweigh_levels(&a.u, None, a.depth(), |l, i| {
        let c = &a.couplings[l];
        c.row(i).map(|b| block(c, b).transpose()).collect()
    }))
}

/// Reweighing factors of the column basis.
pub fn reweigh_cols(a: &H2Matrix) -> Result<NodeFactors> {
    if !is_orthogonal(&a.u, ORTH_TOL) {
        return Err(H2Error::Precondition("row basis is not orthogonal".into()));
    }
    let index: Vec<_> = a.couplings.iter().enumerate().map(|(l, c)| column_index(c, 1 << l)).collect();
    Ok(reweigh_levels(&a.v, None, a.depth(), |l, s| {
        index[l][s].iter().map(|&(_, b)| block(&a.couplings[l], b)).collect()
    }))
}

/// Top-down reweighing over levels `0..=last` of `basis`. `root_parent` is
/// the inherited term of the root (`R_parent E^T`, when the tree is a
/// branch of a larger one); `blocks(l, i)` yields the node's own stacked
/// blocks, each with `ranks[l]` columns, in stacking order.
pub fn reweigh_levels(
    basis: &BasisTree,
    root_parent: Option<&DMatrix<f64>>,
    last: usize,
    blocks: impl Fn(usize, usize) -> Vec<DMatrix<f64>>,
) -> NodeFactors {
    let mut r: NodeFactors = vec![Vec::new(); last + 1];
    for l in 0..=last {
        let k = basis.ranks[l];
        let level: Vec<DMatrix<f64>> = (0..1usize << l)
            .map(|i| {
                let parent = if l == 0 { root_parent.cloned() } else { Some(parent_term(&r[l - 1][i / 2], basis, l, i)) };
                reweigh_node(parent.as_ref(), blocks(l, i).iter(), k)
            })
            .collect();
        r[l] = level;
    }
    r
}

/// Inherited part `R_parent E_i^T` of the stack of node `(level, i)`.
pub fn parent_term(r_parent: &DMatrix<f64>, basis: &BasisTree, level: usize, i: usize) -> DMatrix<f64> {
    r_parent * transfer_matrix(basis, level, i).transpose()
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(H2Error::InvalidArgument(format!("truncation threshold must be non-negative, got {tau}")));
    }
    Ok(())
}

/// Unpadded result of a truncation pass over one tree.
#[derive(Clone, Debug, Default)]
pub struct Truncated {
    /// New leaf bases (`rows x r_i`); empty when the pass started from
    /// given bottom-level maps.
    pub leaves: Vec<DMatrix<f64>>,
    /// New transfers per level (`transfers[0]` empty), `r_child x r_parent`.
    pub transfers: Vec<Vec<DMatrix<f64>>>,
    /// Maps `T = B_new^T B_old` per level, `r_i x k_old`.
    pub maps: NodeFactors,
}

impl Truncated {
    /// New rank of every node.
    pub fn node_ranks(&self) -> Vec<Vec<usize>> {
        self.maps.iter().map(|lv| lv.iter().map(|t| t.nrows()).collect()).collect()
    }

    /// Largest new rank per level.
    pub fn level_ranks(&self) -> Vec<usize> {
        self.node_ranks().iter().map(|lv| lv.iter().copied().max().unwrap_or(0)).collect()
    }

    /// Pads to the level ranks `ranks` and writes a basis with the leaf
    /// layout of `like`. Also returns the padded maps.
    pub fn finish(&self, like: &BasisTree, ranks: &[usize]) -> Result<(BasisTree, NodeFactors)> {
        let q = like.depth;
        if ranks.len() != q + 1 {
            return structure("one rank per level is needed");
        }
        let mut nb = BasisTree::zeros_with_leaves(like.leaf_begin.clone(), ranks.to_vec())?;
        for (i, u) in self.leaves.iter().enumerate() {
            nb.leaf_mut(i).copy_from_slice(pad_to(u, u.nrows(), ranks[q]).as_slice());
        }
        for l in 1..=q {
            for (i, e) in self.transfers[l].iter().enumerate() {
                nb.transfer_mut(l, i).copy_from_slice(pad_to(e, ranks[l], ranks[l - 1]).as_slice());
            }
        }
        let maps = self
            .maps
            .iter()
            .enumerate()
            .map(|(l, lv)| lv.iter().map(|t| pad_to(t, ranks[l], t.ncols())).collect())
            .collect();
        Ok((nb, maps))
    }
}

/// Leaf stage of the truncation: new leaf bases and their maps.
pub fn truncate_leaves(b: &BasisTree, r: &[DMatrix<f64>], tau: f64, mode: Truncation) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
    (0..b.leaf_count()).map(|i| truncate_leaf(&leaf_matrix(b, i), &r[i], tau, mode)).collect()
}

/// Truncation upsweep over `b` with reweighing factors `r`. When `bottom`
/// is given it holds the (unpadded) maps of the bottom level and the leaf
/// stage is skipped; this is how the root of a distributed tree continues
/// from the gathered branch roots.
pub fn truncate_tree(
    b: &BasisTree,
    r: &NodeFactors,
    tau: f64,
    mode: Truncation,
    bottom: Option<Vec<DMatrix<f64>>>,
) -> Result<Truncated> {
    check_tau(tau)?;
    let q = b.depth;
    // the bottom level's factors are only needed by the leaf stage
    let need = if bottom.is_some() { q } else { q + 1 };
    if r.len() < need || r.iter().take(need).enumerate().any(|(l, f)| f.len() != 1 << l) {
        return structure("reweighing factors do not cover the basis tree");
    }
    let mut out = Truncated { leaves: Vec::new(), transfers: vec![Vec::new(); q + 1], maps: vec![Vec::new(); q + 1] };
    out.maps[q] = match bottom {
        Some(m) if m.len() == 1 << q => m,
        Some(_) => return structure("bottom-level maps do not match the tree"),
        None => {
            let (leaves, maps) = truncate_leaves(b, &r[q], tau, mode).into_iter().unzip();
            out.leaves = leaves;
            maps
        }
    };
    for l in (1..=q).rev() {
        let t = &out.maps[l];
        let mut level_e = Vec::with_capacity(t.len());
        let mut parents = Vec::with_capacity(t.len() / 2);
        for i in 0..t.len() / 2 {
            let (c1, c2) = (2 * i, 2 * i + 1);
            let (e1, e2, tp) = truncate_pair(
                &t[c1],
                &transfer_matrix(b, l, c1),
                t[c1].nrows(),
                &t[c2],
                &transfer_matrix(b, l, c2),
                t[c2].nrows(),
                &r[l - 1][i],
                tau,
                mode,
            );
            level_e.push(e1);
            level_e.push(e2);
            parents.push(tp);
        }
        out.transfers[l] = level_e;
        out.maps[l - 1] = parents;
    }
    Ok(out)
}

/// Truncated basis (padded to the level maxima) and the maps `T` from old
/// to new coefficients.
pub fn truncate_upsweep(b: &BasisTree, r: &NodeFactors, tau: f64, mode: Truncation) -> Result<(BasisTree, NodeFactors)> {
    let t = truncate_tree(b, r, tau, mode, None)?;
    t.finish(b, &t.level_ranks())
}

/// `Tu S Tv^T` for one block.
pub fn project_block(tu: &DMatrix<f64>, s: &[f64], tv: &DMatrix<f64>) -> DMatrix<f64> {
    tu * DMatrix::from_column_slice(tu.ncols(), tv.ncols(), s) * tv.transpose()
}

/// `S' = Tu S Tv^T` for every block of `couplings`.
pub fn project_levels(couplings: &[CouplingLevel], tu: &NodeFactors, tv: &NodeFactors) -> Result<Vec<CouplingLevel>> {
    let mut out = Vec::with_capacity(couplings.len());
    for (l, c) in couplings.iter().enumerate() {
        let (tul, tvl) = match (tu.get(l), tv.get(l)) {
            (Some(a), Some(b)) => (a, b),
            _ => return structure(format!("no truncation maps for level {l}")),
        };
        let kr = tul.first().map_or(0, |m| m.nrows());
        let kc = tvl.first().map_or(0, |m| m.nrows());
        let mut nc = CouplingLevel {
            rank_rows: kr,
            rank_cols: kc,
            row_ptr: c.row_ptr.clone(),
            cols: c.cols.clone(),
            data: vec![0.0; c.len() * kr * kc],
        };
        for t in 0..c.rows() {
            for b in c.row(t) {
                let s = c.cols[b];
                let (mt, ms) = match (tul.get(t), tvl.get(s)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return structure(format!("missing truncation map for block ({t},{s}) on level {l}")),
                };
                nc.block_mut(b).copy_from_slice(project_block(mt, c.block(b).data, ms).as_slice());
            }
        }
        out.push(nc);
    }
    Ok(out)
}

/// Projects the couplings of `a` onto new bases.
pub fn project_couplings(a: &H2Matrix, u: BasisTree, v: BasisTree, tu: &NodeFactors, tv: &NodeFactors) -> Result<H2Matrix> {
    let couplings = project_levels(&a.couplings, tu, tv)?;
    H2Matrix::from_parts(a.row_tree.clone(), a.col_tree.clone(), u, v, couplings, a.dense.clone(), a.eta, a.kernel)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompressOptions {
    pub tau: f64,
    pub mode: Truncation,
}

impl CompressOptions {
    pub fn new(tau: f64) -> Self {
        CompressOptions { tau, mode: Truncation::NodeRelative }
    }
}

/// Recompression: orthogonalize when needed, reweigh both bases, truncate,
/// and project the couplings. The result has orthogonal bases.
pub fn compress(a: &H2Matrix, tau: f64) -> Result<H2Matrix> {
    compress_with(a, CompressOptions::new(tau))
}

pub fn compress_with(a: &H2Matrix, opts: CompressOptions) -> Result<H2Matrix> {
    check_tau(opts.tau)?;
    let mut work = a.clone();
    if !is_orthogonal(&work.u, ORTH_TOL) || !is_orthogonal(&work.v, ORTH_TOL) {
        orthogonalize(&mut work);
    }
    // with equal bases and S_ts = S_st^T the column pass would repeat the
    // row pass operation for operation
    let shared = work.u == work.v && is_symmetric_structure(&work);
    let ru = reweigh_rows(&work)?;
    let (u, tu) = truncate_upsweep(&work.u, &ru, opts.tau, opts.mode)?;
    let (v, tv) = if shared {
        (u.clone(), tu.clone())
    } else {
        let rv = reweigh_cols(&work)?;
        truncate_upsweep(&work.v, &rv, opts.tau, opts.mode)?
    };
    project_couplings(&work, u, v, &tu, &tv)
}

/// True when every coupling satisfies `S_ts = S_st^T` bitwise.
fn is_symmetric_structure(a: &H2Matrix) -> bool {
    a.couplings.iter().all(|c| {
        c.rank_rows == c.rank_cols
            && (0..c.rows()).all(|t| {
                c.row(t).all(|b| match c.find(c.cols[b], t) {
                    Some(bt) => block(c, b) == block(c, bt).transpose(),
                    None => false,
                })
            })
    })
}

#[cfg(test)]
mod tests;
