use sprs::{CsMat, TriMat};

use super::FracProblem;

/// Non-fractional correction over the interior points in grid order: the
/// 5-point discretization of `-div(kappa grad u)` with harmonic-mean edge
/// coefficients, scaled by `c_scale * h^(-2 beta)`. Neighbours outside the
/// domain hold `u = 0`.
pub type SparseCorrection = CsMat<f64>;

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

pub fn assemble_c(problem: &FracProblem) -> SparseCorrection {
    let n = problem.n;
    let h = problem.h();
    let scale = problem.c_scale * h.powf(-2.0 - 2.0 * problem.beta);
    let kappa = |i: i64, j: i64| problem.field.eval(&[problem.coord(i), problem.coord(j)]);
    let inside = |i: i64| (0..n as i64).contains(&i);
    let mut tri = TriMat::with_capacity((n * n, n * n), 5 * n * n);
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let row = problem.index(i as usize, j as usize);
            let kp = kappa(i, j);
            let mut diag = 0.0;
            for (di, dj) in [(0, -1), (-1, 0), (1, 0), (0, 1)] {
                let (a, b) = (i + di, j + dj);
                let w = harmonic(kp, kappa(a, b));
                diag += w;
                if inside(a) && inside(b) {
                    tri.add_triplet(row, problem.index(a as usize, b as usize), -scale * w);
                }
            }
            tri.add_triplet(row, row, scale * diag);
        }
    }
    tri.to_csr()
}

/// `y = A x` for a CSR matrix.
pub fn spmv(a: &CsMat<f64>, x: &[f64], y: &mut [f64]) {
    for (yi, row) in y.iter_mut().zip(a.outer_iterator()) {
        *yi = row.iter().map(|(j, &v)| v * x[j]).sum();
    }
}

pub fn diagonal(a: &CsMat<f64>) -> Vec<f64> {
    a.outer_iterator().enumerate().map(|(i, row)| row.get(i).copied().unwrap_or(0.0)).collect()
}
