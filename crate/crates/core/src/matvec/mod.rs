//! Single-rank products `y = alpha A x + beta y`.
//!
//! Vectors are column-major `n x nv` blocks in tree ordering; use
//! [`to_tree_order`] and [`from_tree_order`] to convert.

mod sample;

pub use sample::{dense_rows_product, random_vectors, sample_rows, sampled_difference, sampled_error};

use crate::dense::{add_into, product, MatMut, MatRef, Op};
use crate::error::{structure, Result};
use crate::geometry::ClusterTree;
use crate::h2::{
    marshal_downsweep_level, marshal_tree_multiply_level, marshal_upsweep_level, BasisTree, CouplingLevel, DenseLayer,
    H2Matrix, VectorTree,
};

/// Leaf coefficients `x_i = V_i^T x` into `xhat`'s leaf level. `x` holds the
/// rows covered by the basis, with leading dimension `ld`.
pub fn leaf_upsweep(v: &BasisTree, x: &[f64], ld: usize, xhat: &mut VectorTree) {
    let (q, nv) = (v.depth, xhat.nv);
    let base = v.leaf_begin[0];
    for i in 0..v.leaf_count() {
        let off = v.leaf_begin[i] - base;
        let xi = MatRef::with_ld(&x[off..], v.leaf_rows(i), nv, ld);
        let p = product(Op::T, v.leaf(i), xi);
        add_into(&mut MatMut::new(xhat.node_mut(q, i), v.ranks[q], nv), &p);
    }
}

/// Transfer part of the upsweep: fills levels `depth - 1` down to 0 from the
/// leaf level of `xhat`.
pub fn transfer_upsweep(v: &BasisTree, xhat: &mut VectorTree) -> Result<()> {
    for l in (1..=v.depth).rev() {
        let plan = marshal_upsweep_level(v, l, xhat.nv)?;
        let (lo, hi) = xhat.levels.split_at_mut(l);
        plan.execute(&v.transfers[l], &hi[0], &mut lo[l - 1])?;
    }
    Ok(())
}

/// `xhat^l = (V^l)^T x` for every level.
pub fn upsweep(v: &BasisTree, x: &[f64], nv: usize) -> Result<VectorTree> {
    let n = v.leaf_begin[v.leaf_count()] - v.leaf_begin[0];
    if x.len() != n * nv {
        return structure(format!("input has {} entries, expected {n} x {nv}", x.len()));
    }
    let mut xhat = VectorTree::zeros(&v.ranks, nv);
    leaf_upsweep(v, x, n.max(1), &mut xhat);
    transfer_upsweep(v, &mut xhat)?;
    Ok(xhat)
}

/// Block-sparse coupling products level by level, batch by batch.
pub fn tree_multiply(couplings: &[CouplingLevel], xhat: &VectorTree, out_ranks: &[usize]) -> Result<VectorTree> {
    if couplings.len() != xhat.levels.len() {
        return structure("coupling levels and coefficient levels differ");
    }
    let mut yhat = VectorTree::zeros(out_ranks, xhat.nv);
    for (l, c) in couplings.iter().enumerate() {
        if c.rank_cols != xhat.ranks[l] || c.rank_rows != out_ranks[l] {
            return structure(format!("level {l} coupling shape does not match the coefficients"));
        }
        marshal_tree_multiply_level(c, xhat.nv).execute(&c.data, &xhat.levels[l], &mut yhat.levels[l])?;
    }
    Ok(yhat)
}

/// Transfer part of the downsweep: pushes every level into its children.
pub fn transfer_downsweep(u: &BasisTree, yhat: &mut VectorTree) -> Result<()> {
    for l in 1..=u.depth {
        let plan = marshal_downsweep_level(u, l, yhat.nv)?;
        let (lo, hi) = yhat.levels.split_at_mut(l);
        plan.execute(&u.transfers[l], &lo[l - 1], &mut hi[0])?;
    }
    Ok(())
}

/// `y_i += U_i yhat_i` on every leaf.
pub fn leaf_downsweep(u: &BasisTree, yhat: &VectorTree, y: &mut [f64], ld: usize) {
    let (q, nv) = (u.depth, yhat.nv);
    let base = u.leaf_begin[0];
    for i in 0..u.leaf_count() {
        let off = u.leaf_begin[i] - base;
        let p = product(Op::N, u.leaf(i), MatRef::new(yhat.node(q, i), u.ranks[q], nv));
        add_into(&mut MatMut::with_ld(&mut y[off..], u.leaf_rows(i), nv, ld), &p);
    }
}

/// Full downsweep, adding the low-rank contribution into `y`.
pub fn downsweep(u: &BasisTree, mut yhat: VectorTree, y: &mut [f64]) -> Result<()> {
    let n = u.leaf_begin[u.leaf_count()] - u.leaf_begin[0];
    if y.len() != n * yhat.nv {
        return structure("output vector has the wrong size");
    }
    transfer_downsweep(u, &mut yhat)?;
    leaf_downsweep(u, &yhat, y, n.max(1));
    Ok(())
}

/// `y += A_dense x` over the leaf blocks, blocks of a row in ascending column
/// order. `x` and `y` are full tree-ordered vectors with leading dimensions
/// `ldx`, `ldy`.
#[allow(clippy::too_many_arguments)]
pub fn dense_multiply(
    dense: &DenseLayer,
    rows: &ClusterTree,
    cols: &ClusterTree,
    x: &[f64],
    ldx: usize,
    y: &mut [f64],
    ldy: usize,
    nv: usize,
) {
    let q = rows.depth();
    for t in 0..dense.rows() {
        let tn = rows.node(q, t);
        for b in dense.row(t) {
            let sn = cols.node(q, dense.cols[b]);
            let p = product(Op::N, dense.block(b, tn.len(), sn.len()), MatRef::with_ld(&x[sn.begin..], sn.len(), nv, ldx));
            add_into(&mut MatMut::with_ld(&mut y[tn.begin..], tn.len(), nv, ldy), &p);
        }
    }
}

/// `alpha * z + beta * y` into `y`; `y` is not read when `beta == 0`.
pub fn axpby(alpha: f64, z: &[f64], beta: f64, y: &mut [f64]) {
    if beta == 0.0 {
        for (yi, &zi) in y.iter_mut().zip(z) {
            *yi = alpha * zi;
        }
    } else {
        for (yi, &zi) in y.iter_mut().zip(z) {
            *yi = alpha * zi + beta * *yi;
        }
    }
}

/// `y := alpha A x + beta y` for `nv` tree-ordered vectors.
pub fn h2_matvec(a: &H2Matrix, x: &[f64], nv: usize, alpha: f64, beta: f64, y: &mut [f64]) -> Result<()> {
    let (n, m) = (a.rows(), a.cols());
    if nv == 0 || x.len() != m * nv || y.len() != n * nv {
        return structure(format!("matvec shapes: matrix {n} x {m}, x has {} entries, y has {}, nv = {nv}", x.len(), y.len()));
    }
    if alpha == 0.0 {
        axpby(0.0, &vec![0.0; y.len()], beta, y);
        return Ok(());
    }
    let xhat = upsweep(a.col_basis(), x, nv)?;
    let yhat = tree_multiply(a.couplings(), &xhat, a.row_ranks())?;
    let mut z = vec![0.0; n * nv];
    downsweep(a.row_basis(), yhat, &mut z)?;
    dense_multiply(a.dense(), a.row_tree(), a.col_tree(), x, m, &mut z, n, nv);
    axpby(alpha, &z, beta, y);
    Ok(())
}

/// Convenience wrapper returning `A x`.
pub fn apply(a: &H2Matrix, x: &[f64], nv: usize) -> Result<Vec<f64>> {
    let mut y = vec![0.0; a.rows() * nv];
    h2_matvec(a, x, nv, 1.0, 0.0, &mut y)?;
    Ok(y)
}

/// Reorders `nv` vectors from the original point order into tree order.
pub fn to_tree_order(tree: &ClusterTree, x: &[f64], nv: usize) -> Vec<f64> {
    let n = tree.len();
    let perm = tree.permutation();
    let mut out = vec![0.0; n * nv];
    for c in 0..nv {
        for (i, &p) in perm.iter().enumerate() {
            out[c * n + i] = x[c * n + p];
        }
    }
    out
}

/// Inverse of [`to_tree_order`].
pub fn from_tree_order(tree: &ClusterTree, x: &[f64], nv: usize) -> Vec<f64> {
    let n = tree.len();
    let perm = tree.permutation();
    let mut out = vec![0.0; n * nv];
    for c in 0..nv {
        for (i, &p) in perm.iter().enumerate() {
            out[c * n + p] = x[c * n + i];
        }
    }
    out
}

#[cfg(test)]
mod tests;
