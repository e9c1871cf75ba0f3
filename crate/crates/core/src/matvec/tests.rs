use nalgebra::DMatrix;

use super::*;
use crate::construct::{construct_h2, KernelSpec};
use crate::geometry::PointCloud;

fn exp_matrix(side: usize, m: usize, p: usize) -> H2Matrix {
    let pts = PointCloud::grid(&[side, side], 1.0).unwrap();
    construct_h2(pts, &KernelSpec::Exp { length: 0.1 }, m, 0.9, p).unwrap()
}

fn col(v: &[f64], n: usize, nv: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(n, nv, v)
}

#[test]
fn zero_input() {
    let a = exp_matrix(16, 16, 3);
    let xhat = upsweep(a.col_basis(), &vec![0.0; 512], 2).unwrap();
    assert!(xhat.is_zero());
    let y = apply(&a, &vec![0.0; 512], 2).unwrap();
    assert!(y.iter().all(|&v| v == 0.0));
}

#[test]
fn upsweep_matches_expanded_bases() {
    let mut a = exp_matrix(8, 16, 2);
    a.randomize(3);
    assert_eq!(a.depth(), 2);
    let x = random_vectors(64, 3, 1);
    let xhat = upsweep(a.col_basis(), &x, 3).unwrap();
    for l in 0..=2 {
        for i in 0..1usize << l {
            let node = a.col_tree().node(l, i);
            let vb = a.col_basis().expand(l, i);
            let xs = col(&x, 64, 3).rows(node.begin, node.len()).into_owned();
            let want = vb.transpose() * xs;
            let got = col(xhat.node(l, i), vb.ncols(), 3);
            assert!((got - want).abs().max() < 1e-13);
        }
    }
}

#[test]
fn single_leaf_identity_basis() {
    let mut b = BasisTree::zeros_with_leaves(vec![0, 3], vec![3]).unwrap();
    b.leaves.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let xhat = upsweep(&b, &[4.0, 5.0, 6.0], 1).unwrap();
    assert_eq!(xhat.levels[0], vec![4.0, 5.0, 6.0]);
}

#[test]
fn tree_multiply_matches_row_sums() {
    let mut a = exp_matrix(32, 16, 3);
    a.randomize(11);
    let xhat = upsweep(a.col_basis(), &random_vectors(1024, 2, 5), 2).unwrap();
    let yhat = tree_multiply(a.couplings(), &xhat, a.row_ranks()).unwrap();
    for (l, c) in a.couplings().iter().enumerate() {
        let k = c.rank_rows;
        for t in 0..c.rows() {
            let mut want = DMatrix::zeros(k, 2);
            for b in c.row(t) {
                want += c.block(b).to_dmatrix() * col(xhat.node(l, c.cols[b]), k, 2);
            }
            assert!((col(yhat.node(l, t), k, 2) - want).abs().max() < 1e-12);
        }
    }
}

#[test]
fn downsweep_from_root_only() {
    let mut a = exp_matrix(8, 16, 2);
    a.randomize(9);
    let u = a.row_basis();
    let mut yhat = VectorTree::zeros(&u.ranks, 1);
    yhat.levels[0] = vec![0.5, -1.0, 2.0, 0.25];
    let mut y = vec![0.0; 64];
    downsweep(u, yhat, &mut y).unwrap();
    let want = u.expand(0, 0) * DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 0.25]);
    assert!((col(&y, 64, 1) - want).abs().max() < 1e-13);
}

#[test]
fn full_product_matches_assembled_matrix() {
    let mut a = exp_matrix(32, 16, 3);
    a.randomize(21);
    let d = a.to_dense();
    let x = random_vectors(1024, 3, 2);
    let y = apply(&a, &x, 3).unwrap();
    let want = &d * col(&x, 1024, 3);
    assert!((col(&y, 1024, 3) - &want).abs().max() < 1e-12 * want.abs().max());
}

#[test]
fn dense_layer_identity() {
    let pts = PointCloud::grid(&[8, 8], 1.0).unwrap();
    let k = FnKernelEye;
    let a = construct_h2(pts, &k, 4, 0.9, 2).unwrap();
    let x = random_vectors(64, 1, 3);
    let y = apply(&a, &x, 1).unwrap();
    for (a, b) in x.iter().zip(&y) {
        assert!((a - b).abs() < 1e-15);
    }
}

struct FnKernelEye;

impl crate::construct::Kernel for FnKernelEye {
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        if x == y {
            1.0
        } else {
            0.0
        }
    }
}

#[test]
fn alpha_beta() {
    let a = exp_matrix(16, 16, 3);
    let x = random_vectors(256, 1, 1);
    let mut y = vec![2.0; 256];
    h2_matvec(&a, &x, 1, 0.0, 0.5, &mut y).unwrap();
    assert!(y.iter().all(|&v| v == 1.0));
    let mut y = vec![f64::NAN; 256];
    h2_matvec(&a, &x, 1, 1.0, 0.0, &mut y).unwrap();
    assert!(y.iter().all(|v| v.is_finite()));
    let ax = y.clone();
    let mut y2 = vec![1.0; 256];
    h2_matvec(&a, &x, 1, 2.0, -1.0, &mut y2).unwrap();
    for (a, b) in ax.iter().zip(&y2) {
        assert!((2.0 * a - 1.0 - b).abs() < 1e-13);
    }
    assert!(h2_matvec(&a, &x, 2, 1.0, 0.0, &mut y2).is_err());
}

#[test]
fn many_vectors_equal_columnwise() {
    let a = exp_matrix(32, 32, 4);
    let n = 1024;
    let nv = 64;
    let x = random_vectors(n, nv, 4);
    let y = apply(&a, &x, nv).unwrap();
    for c in 0..nv {
        let yc = apply(&a, &x[c * n..(c + 1) * n], 1).unwrap();
        let scale = yc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            assert!((yc[i] - y[c * n + i]).abs() <= 1e-13 * scale);
        }
    }
}

#[test]
fn linearity() {
    let a = exp_matrix(32, 16, 4);
    let x1 = random_vectors(1024, 1, 1);
    let x2 = random_vectors(1024, 1, 2);
    let sum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
    let (y1, y2, ys) = (apply(&a, &x1, 1).unwrap(), apply(&a, &x2, 1).unwrap(), apply(&a, &sum, 1).unwrap());
    let norm = ys.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff = ys.iter().zip(y1.iter().zip(&y2)).map(|(s, (a, b))| (s - a - b).powi(2)).sum::<f64>().sqrt();
    assert!(diff <= 1e-12 * norm);
}

#[test]
fn symmetric_kernel_gives_symmetric_product() {
    let a = exp_matrix(32, 16, 4);
    let x = random_vectors(1024, 1, 7);
    let y = random_vectors(1024, 1, 8);
    let ax = apply(&a, &x, 1).unwrap();
    let ay = apply(&a, &y, 1).unwrap();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let nrm = |u: &[f64]| dot(u, u).sqrt();
    let anorm = nrm(&ax) / nrm(&x);
    assert!((dot(&y, &ax) - dot(&x, &ay)).abs() <= 1e-10 * nrm(&x) * nrm(&y) * anorm);
}

#[test]
fn accuracy_against_kernel() {
    let a = exp_matrix(64, 64, 8);
    let err = sampled_error(&a, &KernelSpec::Exp { length: 0.1 }, 0.1, 1, 3).unwrap();
    assert!(err < 1e-6, "sampled error {err}");
}

#[test]
fn tree_order_round_trip() {
    let a = exp_matrix(8, 4, 2);
    let x = random_vectors(64, 2, 1);
    let t = to_tree_order(a.row_tree(), &x, 2);
    assert_eq!(from_tree_order(a.row_tree(), &t, 2), x);
}
