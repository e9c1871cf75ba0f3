use std::time::Instant;

use h2kit::dist::dist_compress;
use h2kit::fdsolver::{assemble_c, assemble_d, assemble_k, FdSystem, FracProblem, Preconditioner};
use h2kit::matvec::random_vectors;

fn system(n: usize) -> FdSystem {
    let p = FracProblem::new(n, 0.75).unwrap();
    let d = assemble_d(&p, 32, 0.7, 6).unwrap();
    let k = assemble_k(&p, 64, 0.7, 6, 4).unwrap();
    FdSystem::new(p, k, d, assemble_c(&p), Preconditioner::None).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn signed(n: usize, seed: u64) -> Vec<f64> {
    random_vectors(n, 1, seed).iter().map(|u| 2.0 * u - 1.0).collect()
}

#[test]
fn operator_is_symmetric() {
    let sys = system(32);
    let n = sys.problem().size();
    let probes: Vec<Vec<f64>> = (0..6).map(|s| signed(n, s)).collect();
    let images: Vec<Vec<f64>> = probes.iter().map(|v| sys.apply(v).unwrap()).collect();
    let norm_est = probes.iter().zip(&images).map(|(v, av)| norm(av) / norm(v)).fold(0.0, f64::max);
    for i in 0..probes.len() {
        for j in i + 1..probes.len() {
            let (u, v) = (&probes[i], &probes[j]);
            let gap = (dot(u, &images[j]) - dot(v, &images[i])).abs();
            assert!(gap <= 1e-9 * norm(u) * norm(v) * norm_est, "probes {i},{j}: {gap:e}");
        }
    }
}

#[test]
fn hundred_positive_probes() {
    let sys = system(16);
    let n = sys.problem().size();
    for s in 0..100 {
        let v = signed(n, 1000 + s);
        assert!(dot(&v, &sys.apply(&v).unwrap()) > 0.0, "probe {s}");
    }
}

#[test]
fn setup_work_grows_like_the_grid() {
    let mut times = Vec::new();
    for n in [64, 128, 256] {
        let p = FracProblem::new(n, 0.75).unwrap();
        let t = Instant::now();
        let d = assemble_d(&p, 32, 0.7, 6).unwrap();
        let k = assemble_k(&p, 64, 0.7, 6, 4).unwrap();
        let (k, _) = dist_compress(&k, 1e-6).unwrap();
        times.push(t.elapsed().as_secs_f64());
        assert_eq!((d.len(), k.rows()), (n * n, n * n));
    }
    for w in times.windows(2) {
        assert!(w[1] / w[0] <= 5.0, "setup times {times:?}");
    }
}
