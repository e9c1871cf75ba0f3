use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::apply;
use crate::construct::Kernel;
use crate::error::Result;
use crate::h2::H2Matrix;

/// `n x nv` entries drawn from the standard uniform distribution on `[0, 1)`.
pub fn random_vectors(n: usize, nv: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * nv).map(|_| rng.gen::<f64>()).collect()
}

/// `ceil(frac * n)` distinct row indices in ascending order.
pub fn sample_rows(n: usize, frac: f64, seed: u64) -> Vec<usize> {
    let count = ((frac * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_5a5a);
    let mut rows = index::sample(&mut rng, n, count).into_vec();
    rows.sort_unstable();
    rows
}

/// Exact kernel products for the tree-ordered `rows` of `a`:
/// a `rows.len() x nv` block.
pub fn dense_rows_product<K: Kernel + ?Sized>(kernel: &K, a: &H2Matrix, rows: &[usize], x: &[f64], nv: usize) -> Vec<f64> {
    let (rt, ct) = (a.row_tree(), a.col_tree());
    let m = a.cols();
    let mut out = vec![0.0; rows.len() * nv];
    for (r, &i) in rows.iter().enumerate() {
        let xi = rt.point(i);
        for j in 0..m {
            let kij = kernel.eval(xi, ct.point(j));
            for c in 0..nv {
                out[r + c * rows.len()] += kij * x[j + c * m];
            }
        }
    }
    out
}

fn rel_diff(reference: &[f64], other: impl Iterator<Item = f64>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&r, o) in reference.iter().zip(other) {
        num += (r - o) * (r - o);
        den += r * r;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative error `|A x - A_H2 x| / |A x|` over a random `frac` of the rows,
/// with `A` evaluated directly from `kernel`.
pub fn sampled_error<K: Kernel + ?Sized>(a: &H2Matrix, kernel: &K, frac: f64, nv: usize, seed: u64) -> Result<f64> {
    let x = random_vectors(a.cols(), nv, seed);
    let y = apply(a, &x, nv)?;
    let rows = sample_rows(a.rows(), frac, seed);
    let exact = dense_rows_product(kernel, a, &rows, &x, nv);
    let n = a.rows();
    let got = (0..nv).flat_map(|c| rows.iter().map(move |&i| (i, c))).map(|(i, c)| y[i + c * n]);
    Ok(rel_diff(&exact, got))
}

/// Relative difference between the products of two matrices over the same
/// trees, on a random `frac` of the rows.
pub fn sampled_difference(reference: &H2Matrix, other: &H2Matrix, frac: f64, nv: usize, seed: u64) -> Result<f64> {
    let x = random_vectors(reference.cols(), nv, seed);
    let ya = apply(reference, &x, nv)?;
    let yb = apply(other, &x, nv)?;
    let rows = sample_rows(reference.rows(), frac, seed);
    let n = reference.rows();
    let pick = |y: &[f64]| -> Vec<f64> { (0..nv).flat_map(|c| rows.iter().map(move |&i| y[i + c * n])).collect() };
    Ok(rel_diff(&pick(&ya), pick(&yb).into_iter()))
}
