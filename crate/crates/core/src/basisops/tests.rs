use nalgebra::DMatrix;

use super::*;
use crate::construct::{construct_h2, FnKernel, KernelSpec};
use crate::geometry::PointCloud;

fn small(p: usize) -> H2Matrix {
    let pts = PointCloud::grid(&[16, 16], 1.0).unwrap();
    construct_h2(pts, &KernelSpec::Exp { length: 0.2 }, 16, 0.9, p).unwrap()
}

fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm()
}

fn lowrank_part(a: &H2Matrix) -> DMatrix<f64> {
    let mut z = a.clone();
    z.dense.data.iter_mut().for_each(|v| *v = 0.0);
    z.to_dense()
}

#[test]
fn orthogonalize_keeps_matrix() {
    let mut a = small(3);
    a.randomize(7);
    let before = a.to_dense();
    assert!(!is_orthogonal(a.row_basis(), 1e-10));
    orthogonalize(&mut a);
    assert!(is_orthogonal(a.row_basis(), 1e-12));
    assert!(is_orthogonal(a.col_basis(), 1e-12));
    assert!(rel(&before, &a.to_dense()) < 1e-12);
}

#[test]
fn orthogonalize_separate_bases() {
    let mut a = small(3);
    a.randomize(3);
    let (u, v, ..) = a.parts_mut();
    assert_ne!(u, v);
    let before = a.to_dense();
    orthogonalize(&mut a);
    assert!(is_orthogonal(a.col_basis(), 1e-12));
    assert!(rel(&before, &a.to_dense()) < 1e-12);
}

#[test]
fn zero_threshold_is_lossless() {
    let a = small(4);
    let c = compress(&a, 0.0).unwrap();
    assert!(rel(&a.to_dense(), &c.to_dense()) < 1e-12);
    assert!(c.row_ranks().iter().zip(a.row_ranks()).all(|(x, y)| x <= y));
}

#[test]
fn rank_two_kernel() {
    let pts = PointCloud::grid(&[16, 16], 1.0).unwrap();
    let k = FnKernel::new(|x: &[f64], y: &[f64]| 1.0 + x[0] * y[1]);
    let a = construct_h2(pts, &k, 16, 0.9, 4).unwrap();
    let c = compress(&a, 1e-10).unwrap();
    assert!(c.row_ranks().iter().all(|&r| r <= 2), "{:?}", c.row_ranks());
    assert!(c.col_ranks().iter().all(|&r| r <= 2));
    assert!(rel(&a.to_dense(), &c.to_dense()) < 1e-12);
}

#[test]
fn recompression_does_not_grow() {
    let a = small(5);
    let c1 = compress(&a, 1e-4).unwrap();
    let c2 = compress(&c1, 1e-4).unwrap();
    assert!(c2.row_ranks().iter().zip(c1.row_ranks()).all(|(x, y)| x <= y));
    assert!(rel(&c1.to_dense(), &c2.to_dense()) < 1e-3);
    let lossless = compress(&c1, 0.0).unwrap();
    assert!(rel(&c1.to_dense(), &lossless.to_dense()) < 1e-12);
}

#[test]
fn weights_match_block_rows() {
    let mut a = small(3);
    orthogonalize(&mut a);
    let r = reweigh_rows(&a).unwrap();
    let lr = lowrank_part(&a);
    let q = a.depth();
    for i in 0..1usize << q {
        let node = a.row_tree().node(q, i);
        let row = lr.rows(node.begin, node.len()).into_owned();
        let want = row.singular_values();
        let got = (a.row_basis().leaf(i).to_dmatrix() * r[q][i].transpose()).singular_values();
        let mut w: Vec<f64> = want.iter().copied().collect();
        let mut g: Vec<f64> = got.iter().copied().collect();
        w.sort_by(|x, y| y.total_cmp(x));
        g.sort_by(|x, y| y.total_cmp(x));
        for (x, y) in w.iter().zip(&g) {
            assert!((x - y).abs() < 1e-10 * w[0].max(1.0), "leaf {i}: {x} vs {y}");
        }
    }
}

#[test]
fn column_weights_match_block_columns() {
    let mut a = small(3);
    a.randomize(11);
    orthogonalize(&mut a);
    let r = reweigh_cols(&a).unwrap();
    let lr = lowrank_part(&a);
    let q = a.depth();
    for s in 0..1usize << q {
        let node = a.col_tree().node(q, s);
        let col = lr.columns(node.begin, node.len()).into_owned();
        let want = col.singular_values();
        let got = (a.col_basis().leaf(s).to_dmatrix() * r[q][s].transpose()).singular_values();
        let sum_w: f64 = want.iter().map(|x| x * x).sum();
        let sum_g: f64 = got.iter().map(|x| x * x).sum();
        assert!((sum_w - sum_g).abs() < 1e-10 * sum_w.max(1.0));
    }
}

#[test]
fn reweigh_needs_orthogonal_opposite_basis() {
    let mut a = small(3);
    a.randomize(5);
    assert!(matches!(reweigh_rows(&a), Err(H2Error::Precondition(_))));
    assert!(matches!(reweigh_cols(&a), Err(H2Error::Precondition(_))));
}

#[test]
fn bad_threshold() {
    let a = small(3);
    assert!(matches!(compress(&a, -1.0), Err(H2Error::InvalidArgument(_))));
    assert!(matches!(compress(&a, f64::NAN), Err(H2Error::InvalidArgument(_))));
}

#[test]
fn compression_reduces_ranks() {
    let a = small(5);
    let c = compress(&a, 1e-3).unwrap();
    assert!(c.memory_report().lowrank_bytes < a.memory_report().lowrank_bytes);
    assert!(rel(&a.to_dense(), &c.to_dense()) < 1e-2);
    assert!(is_orthogonal(c.row_basis(), 1e-12));
}

#[test]
fn absolute_mode() {
    let a = small(4);
    let huge = compress_with(&a, CompressOptions { tau: 1e30, mode: Truncation::Absolute }).unwrap();
    assert!(huge.row_ranks().iter().all(|&r| r == 0));
    let d = huge.to_dense();
    let dense_only = a.to_dense() - lowrank_part(&a);
    assert!((d - dense_only).norm() == 0.0);
}

