use h2kit::basisops::{compress, is_orthogonal, orthogonalize};
use h2kit::construct::{construct_h2, KernelSpec};
use h2kit::dist::{dist_apply, dist_compress, DistributedH2};
use h2kit::geometry::PointCloud;
use h2kit::io::{load, save};
use h2kit::matvec::{apply, random_vectors, sampled_difference, sampled_error};
use h2kit::H2Matrix;

fn build(n: usize) -> H2Matrix {
    construct_h2(PointCloud::test_family(2, n, 1.0).unwrap(), &KernelSpec::Exp { length: 0.1 }, 64, 0.9, 6).unwrap()
}

#[test]
fn save_load_multiply() {
    let a = build(4096);
    let dir = std::env::temp_dir().join(format!("h2kit-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("a.h2");
    save(&a, &path).unwrap();
    let b = load(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(a, b);
    let x = random_vectors(4096, 2, 1);
    assert_eq!(apply(&a, &x, 2).unwrap(), apply(&b, &x, 2).unwrap());
}

#[test]
fn compressed_matrix_keeps_accuracy() {
    let a = build(4096);
    let kernel = KernelSpec::Exp { length: 0.1 };
    let before = sampled_error(&a, &kernel, 0.1, 1, 2).unwrap();
    let c = compress(&a, 1e-4).unwrap();
    assert!(is_orthogonal(c.row_basis(), 1e-10) && is_orthogonal(c.col_basis(), 1e-10));
    assert!(c.memory_report().lowrank_bytes < a.memory_report().lowrank_bytes);
    assert!(sampled_difference(&a, &c, 0.1, 1, 3).unwrap() <= 1e-3);
    assert!(sampled_error(&c, &kernel, 0.1, 1, 2).unwrap() <= before + 1e-3);
}

#[test]
fn orthogonalize_then_distribute() {
    let mut a = build(4096);
    orthogonalize(&mut a);
    let x = random_vectors(4096, 1, 5);
    let want = apply(&a, &x, 1).unwrap();
    let d = DistributedH2::distribute(&a, 8).unwrap();
    assert_eq!(dist_apply(&d, &x, 1).unwrap().0, want);
    let (dc, trace) = dist_compress(&d, 1e-3).unwrap();
    assert_eq!(trace.sent.len(), 8);
    assert_eq!(dc.to_h2().unwrap(), compress(&a, 1e-3).unwrap());
}
