//! Per-node factorizations shared by the single-rank and distributed
//! compression paths. Given equal inputs they return bitwise-equal outputs.

use nalgebra::DMatrix;

use crate::dense::{qr_r, qr_thin, svd};

/// How singular values are compared against the threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Truncation {
    /// Keep `sigma_i >= tau * sigma_max` of the node being truncated.
    #[default]
    NodeRelative,
    /// Keep `sigma_i >= tau`.
    Absolute,
}

/// Number of singular values kept. `tau == 0` keeps all of them.
pub fn retained_rank(sigma: &[f64], tau: f64, mode: Truncation) -> usize {
    if tau == 0.0 {
        return sigma.len();
    }
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cut = match mode {
        Truncation::NodeRelative => tau * smax,
        Truncation::Absolute => tau,
    };
    sigma.iter().take_while(|&&s| s > 0.0 && s >= cut).count()
}

/// QR of a leaf basis: `(Q, R)` with `Q` the same shape as `b`.
pub fn orth_leaf(b: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    qr_thin(b)
}

/// Rows `0..n1` of `a1` stacked on rows `0..n2` of `a2`.
fn stack_active(a1: &DMatrix<f64>, n1: usize, a2: &DMatrix<f64>, n2: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n1 + n2, a1.ncols());
    w.rows_mut(0, n1).copy_from(&a1.rows(0, n1));
    w.rows_mut(n1, n2).copy_from(&a2.rows(0, n2));
    w
}

/// Inverse of [`stack_active`]: scatters the rows of `q` into two zero
/// matrices with `k` rows each.
fn split_active(q: &DMatrix<f64>, k: usize, n1: usize, n2: usize, cols: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut e1 = DMatrix::zeros(k, cols);
    let mut e2 = DMatrix::zeros(k, cols);
    e1.view_mut((0, 0), (n1, cols)).copy_from(&q.view((0, 0), (n1, cols)));
    e2.view_mut((0, 0), (n2, cols)).copy_from(&q.view((n1, 0), (n2, cols)));
    (e1, e2)
}

/// Number of leading orthonormal columns of a leaf basis after [`orth_leaf`].
pub fn leaf_active(rows: usize, rank: usize) -> usize {
    rows.min(rank)
}

/// QR of `[R1 E1; R2 E2]`: the new child transfers, the parent factor and
/// the number of leading orthonormal columns of the parent. Only the first
/// `n1` (`n2`) columns of the children are orthonormal; the rest are zero
/// and so are the matching rows of the new transfers.
pub fn orth_pair(
    r1: &DMatrix<f64>,
    e1: &DMatrix<f64>,
    n1: usize,
    r2: &DMatrix<f64>,
    e2: &DMatrix<f64>,
    n2: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, usize) {
    let (k, kp) = e1.shape();
    let w = stack_active(&(r1.rows(0, n1) * e1), n1, &(r2.rows(0, n2) * e2), n2);
    let (q, r) = qr_thin(&w);
    let (a, b) = split_active(&q, k, n1, n2, kp);
    (a, b, r, (n1 + n2).min(kp))
}

/// Reweighing factor of one node: the `R` of the QR of
/// `[parent; blocks...]`, stacked in the given order. `cols` is the node rank.
pub fn reweigh_node<'a>(parent: Option<&'a DMatrix<f64>>, blocks: impl IntoIterator<Item = &'a DMatrix<f64>>, cols: usize) -> DMatrix<f64> {
    let blocks: Vec<&DMatrix<f64>> = parent.into_iter().chain(blocks).collect();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut z = DMatrix::zeros(rows, cols);
    let mut r0 = 0;
    for b in blocks {
        z.view_mut((r0, 0), b.shape()).copy_from(b);
        r0 += b.nrows();
    }
    qr_r(&z)
}

/// Truncation of a leaf. Returns the new orthonormal basis (`m x r`) and
/// the map `T = U_new^T U` (`r x k`).
pub fn truncate_leaf(u: &DMatrix<f64>, r: &DMatrix<f64>, tau: f64, mode: Truncation) -> (DMatrix<f64>, DMatrix<f64>) {
    let weighted = u * r.transpose();
    let f = svd(&weighted);
    let rank = retained_rank(&f.sigma, tau, mode);
    let unew = f.u.columns(0, rank).into_owned();
    let t = unew.transpose() * u;
    (unew, t)
}

/// Truncation of an inner node from its children's maps `T_c` (only the
/// first `n1` and `n2` rows are used) and old transfers `E_c`. Returns the
/// new child transfers (`n1 x r` and `n2 x r`) and the node map `T`
/// (`r x k`).
#[allow(clippy::too_many_arguments)]
pub fn truncate_pair(
    t1: &DMatrix<f64>,
    e1: &DMatrix<f64>,
    n1: usize,
    t2: &DMatrix<f64>,
    e2: &DMatrix<f64>,
    n2: usize,
    r: &DMatrix<f64>,
    tau: f64,
    mode: Truncation,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (te1, te2) = (t1.rows(0, n1) * e1, t2.rows(0, n2) * e2);
    let rt = r.transpose();
    let w = stack_active(&(&te1 * &rt), n1, &(&te2 * &rt), n2);
    let f = svd(&w);
    let rank = retained_rank(&f.sigma, tau, mode);
    let e1n = f.u.view((0, 0), (n1, rank)).into_owned();
    let e2n = f.u.view((n1, 0), (n2, rank)).into_owned();
    let t = e1n.transpose() * te1 + e2n.transpose() * te2;
    (e1n, e2n, t)
}

/// Copies `m` into the top-left corner of a zero `rows x cols` matrix.
pub fn pad_to(m: &DMatrix<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    out.view_mut((0, 0), m.shape()).copy_from(m);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_semantics() {
        let s = [4.0, 2.0, 0.5, 0.0];
        assert_eq!(retained_rank(&s, 0.0, Truncation::NodeRelative), 4);
        assert_eq!(retained_rank(&s, 0.5, Truncation::NodeRelative), 2);
        assert_eq!(retained_rank(&s, 1.0, Truncation::NodeRelative), 1);
        assert_eq!(retained_rank(&s, 1.0, Truncation::Absolute), 2);
        assert_eq!(retained_rank(&[0.0, 0.0], 1e-3, Truncation::NodeRelative), 0);
    }

    #[test]
    fn orth_pair_reproduces_stack() {
        let r1 = DMatrix::from_fn(3, 3, |i, j| if i <= j { 1.0 + (i + j) as f64 } else { 0.0 });
        let r2 = DMatrix::identity(3, 3) * 2.0;
        let e1 = DMatrix::from_fn(3, 2, |i, j| (i as f64 - j as f64).sin());
        let e2 = DMatrix::from_fn(3, 2, |i, j| (i * j) as f64 + 0.5);
        let (n1, n2, r, n) = orth_pair(&r1, &e1, 3, &r2, &e2, 3);
        assert_eq!(n, 2);
        assert!((&n1 * &r - &r1 * &e1).abs().max() < 1e-13);
        assert!((&n2 * &r - &r2 * &e2).abs().max() < 1e-13);
        let g = n1.transpose() * &n1 + n2.transpose() * &n2;
        assert!((g - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn reweigh_gram() {
        let p = DMatrix::from_fn(2, 3, |i, j| (i + 2 * j) as f64);
        let s = DMatrix::from_fn(4, 3, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let r = reweigh_node(Some(&p), [&s], 3);
        let want = p.transpose() * &p + s.transpose() * &s;
        assert!((r.transpose() * &r - want).abs().max() < 1e-12);
        assert_eq!(reweigh_node(None, [], 2), DMatrix::zeros(2, 2));
    }

    #[test]
    fn leaf_truncation_exact_rank() {
        // rank-2 weighted basis
        let u = crate::dense::qr_thin(&DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).cos())).0;
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let (unew, t) = truncate_leaf(&u, &r, 1e-10, Truncation::NodeRelative);
        assert_eq!(unew.ncols(), 2);
        assert!((&unew * &t * r.transpose() - &u * r.transpose()).abs().max() < 1e-13);
    }
}
