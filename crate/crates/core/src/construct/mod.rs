//! Interpolation-based construction of H² matrices from a kernel.

mod cheb;
mod kernel;

pub use cheb::{cheb_nodes, cheb_points, leaf_basis, transfer_matrix, ChebGrid};
pub use kernel::{bump, FnKernel, KappaField, Kernel, KernelSpec};

use crate::error::{H2Error, Result};
use crate::geometry::{dual_tree_traversal, ClusterTree, PointCloud};
use crate::h2::{BasisTree, CouplingLevel, DenseLayer, H2Matrix};

/// `k_t x k_s` matrix of kernel values between two grids.
pub fn coupling_matrix<K: Kernel + ?Sized>(kernel: &K, rows: &ChebGrid, cols: &ChebGrid) -> Result<Vec<f64>> {
    let (rp, cp) = (rows.points(), cols.points());
    let mut out = vec![0.0; rp.len() * cp.len()];
    fill_block(kernel, &rp, &cp, &mut out)?;
    Ok(out)
}

fn fill_block<K: Kernel + ?Sized, P: AsRef<[f64]>>(kernel: &K, xs: &[P], ys: &[P], out: &mut [f64]) -> Result<()> {
    let m = xs.len();
    for (j, y) in ys.iter().enumerate() {
        for (i, x) in xs.iter().enumerate() {
            let v = kernel.eval(x.as_ref(), y.as_ref());
            if !v.is_finite() {
                return Err(H2Error::Kernel(format!("kernel value {v} at {:?}, {:?}", x.as_ref(), y.as_ref())));
            }
            out[i + j * m] = v;
        }
    }
    Ok(())
}

/// Square H² matrix over one point set: kd-tree with leaves of at most
/// `leaf_size` points, admissibility parameter `eta`, and `p` Chebyshev
/// points per axis (rank `p^dim`).
pub fn construct_h2<K: Kernel + ?Sized>(points: PointCloud, kernel: &K, leaf_size: usize, eta: f64, p: usize) -> Result<H2Matrix> {
    let tree = ClusterTree::build(points, leaf_size)?;
    construct_h2_with_trees(tree.clone(), tree, kernel, eta, p)
}

fn grids(tree: &ClusterTree, p: usize) -> Vec<ChebGrid> {
    tree.nodes().iter().map(|n| cheb_nodes(p, &n.bbox)).collect()
}

fn basis_from_grids(tree: &ClusterTree, grids: &[ChebGrid], k: usize) -> Result<BasisTree> {
    let q = tree.depth();
    let mut basis = BasisTree::zeros(tree, vec![k; q + 1])?;
    for (i, leaf) in tree.leaves().iter().enumerate() {
        let pts: Vec<&[f64]> = leaf.range().map(|j| tree.point(j)).collect();
        let g = &grids[ClusterTree::node_id(q, i)];
        basis.leaf_mut(i).copy_from_slice(&leaf_basis(&pts, g));
    }
    for l in 1..=q {
        for i in 0..1usize << l {
            let child = &grids[ClusterTree::node_id(l, i)];
            let parent = &grids[ClusterTree::node_id(l - 1, i / 2)];
            basis.transfer_mut(l, i).copy_from_slice(&transfer_matrix(child, parent));
        }
    }
    Ok(basis)
}

/// H² matrix between the points of `row_tree` and those of `col_tree`. Both
/// trees must have the same depth.
pub fn construct_h2_with_trees<K: Kernel + ?Sized>(
    row_tree: ClusterTree,
    col_tree: ClusterTree,
    kernel: &K,
    eta: f64,
    p: usize,
) -> Result<H2Matrix> {
    if p == 0 {
        return Err(H2Error::InvalidArgument("interpolation order must be positive".into()));
    }
    if row_tree.dim() != col_tree.dim() {
        return Err(H2Error::Structure("row and column points differ in dimension".into()));
    }
    let st = dual_tree_traversal(&row_tree, &col_tree, eta)?;
    let q = row_tree.depth();
    let k = p.pow(row_tree.dim() as u32);

    let row_grids = grids(&row_tree, p);
    let shared = row_tree == col_tree;
    let col_grids = if shared { row_grids.clone() } else { grids(&col_tree, p) };
    let u = basis_from_grids(&row_tree, &row_grids, k)?;
    let v = if shared { u.clone() } else { basis_from_grids(&col_tree, &col_grids, k)? };

    let row_pts: Vec<Vec<Vec<f64>>> = row_grids.iter().map(ChebGrid::points).collect();
    let col_pts: Vec<Vec<Vec<f64>>> = if shared { row_pts.clone() } else { col_grids.iter().map(ChebGrid::points).collect() };
    let mut couplings = Vec::with_capacity(q + 1);
    for l in 0..=q {
        let mut level = CouplingLevel::from_pairs(1 << l, &st.lowrank[l], k, k)?;
        for (b, &(t, s)) in st.lowrank[l].iter().enumerate() {
            let (xs, ys) = (&row_pts[ClusterTree::node_id(l, t)], &col_pts[ClusterTree::node_id(l, s)]);
            fill_block(kernel, xs, ys, level.block_mut(b))?;
        }
        couplings.push(level);
    }

    let row_len = |t: usize| row_tree.node(q, t).len();
    let col_len = |s: usize| col_tree.node(q, s).len();
    let mut dense = DenseLayer::from_pairs(1 << q, &st.dense, row_len, col_len)?;
    for (b, &(t, s)) in st.dense.iter().enumerate() {
        let xs: Vec<&[f64]> = row_tree.node(q, t).range().map(|i| row_tree.point(i)).collect();
        let ys: Vec<&[f64]> = col_tree.node(q, s).range().map(|j| col_tree.point(j)).collect();
        fill_block(kernel, &xs, &ys, dense.block_mut(b))?;
    }

    H2Matrix::from_parts(row_tree, col_tree, u, v, couplings, dense, eta, kernel.spec())
}

/// Kernel matrix entries `A[i, j]` for tree-ordered row indices `rows`
/// against all columns, as a `rows.len() x n_cols` column-major block.
pub fn kernel_rows<K: Kernel + ?Sized>(kernel: &K, row_tree: &ClusterTree, col_tree: &ClusterTree, rows: &[usize]) -> Vec<f64> {
    let m = rows.len();
    let mut out = vec![0.0; m * col_tree.len()];
    for j in 0..col_tree.len() {
        let y = col_tree.point(j);
        for (r, &i) in rows.iter().enumerate() {
            out[r + j * m] = kernel.eval(row_tree.point(i), y);
        }
    }
    out
}
