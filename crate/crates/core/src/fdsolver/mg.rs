use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use sprs::{CsMat, TriMat};

use super::stencil::{diagonal, spmv};
use crate::error::{H2Error, Result};

/// Grids at or below this side are solved directly.
pub const COARSEST_SIDE: usize = 16;
const MAX_DIRECT_SIDE: usize = 64;
const OMEGA: f64 = 2.0 / 3.0;
const SWEEPS: usize = 2;

struct Level {
    a: CsMat<f64>,
    inv_diag: Vec<f64>,
    /// Prolongation from the next coarser grid.
    p: CsMat<f64>,
    /// `P^T / 4`.
    r: CsMat<f64>,
}

/// Geometric multigrid V-cycle for an operator on a cell-centred `n x n`
/// grid (grid order `j * n + i`): weighted Jacobi smoothing, bilinear
/// prolongation, full-weighting restriction `P^T / 4`, Galerkin coarse
/// operators and a Cholesky solve on the coarsest grid.
pub struct Multigrid {
    sides: Vec<usize>,
    levels: Vec<Level>,
    coarse: Cholesky<f64, Dyn>,
}

/// Bilinear prolongation from an `nc x nc` to a `2nc x 2nc` cell-centred
/// grid. Coarse neighbours outside the grid are dropped.
pub fn prolongation(nc: usize) -> CsMat<f64> {
    let nf = 2 * nc;
    let mut tri = TriMat::with_capacity((nf * nf, nc * nc), 4 * nf * nf);
    let taps = |f: usize| {
        let c = f / 2;
        let other = if f % 2 == 0 { c.checked_sub(1) } else { Some(c + 1).filter(|&k| k < nc) };
        [(Some(c), 0.75), (other, 0.25)]
    };
    for fj in 0..nf {
        for fi in 0..nf {
            for (ci, wi) in taps(fi) {
                for (cj, wj) in taps(fj) {
                    if let (Some(ci), Some(cj)) = (ci, cj) {
                        tri.add_triplet(fj * nf + fi, cj * nc + ci, wi * wj);
                    }
                }
            }
        }
    }
    tri.to_csr()
}

fn to_dense(a: &CsMat<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.rows(), a.cols());
    for (i, row) in a.outer_iterator().enumerate() {
        for (j, &v) in row.iter() {
            m[(i, j)] = v;
        }
    }
    m
}

impl Multigrid {
    pub fn new(a: CsMat<f64>, n: usize) -> Result<Self> {
        if a.rows() != n * n || a.cols() != n * n {
            return Err(H2Error::InvalidArgument(format!("operator of shape {:?} is not on a {n} x {n} grid", a.shape())));
        }
        let mut sides = vec![n];
        let mut levels = Vec::new();
        let mut a = a;
        let mut side = n;
        while side > COARSEST_SIDE && side % 2 == 0 {
            let p = prolongation(side / 2);
            let r = p.transpose_view().to_csr().map(|v| 0.25 * v);
            let coarse = &(&r * &a) * &p;
            let inv_diag = diagonal(&a)
                .into_iter()
                .map(|d| if d > 0.0 { 1.0 / d } else { f64::NAN })
                .collect::<Vec<_>>();
            if inv_diag.iter().any(|v| v.is_nan()) {
                return Err(H2Error::Precondition("multigrid operator has a nonpositive diagonal".into()));
            }
            levels.push(Level { a, inv_diag, p, r });
            a = coarse;
            side /= 2;
            sides.push(side);
        }
        if side > MAX_DIRECT_SIDE {
            return Err(H2Error::InvalidArgument(format!("grid side {n} does not coarsen below {MAX_DIRECT_SIDE}")));
        }
        let coarse = Cholesky::new(to_dense(&a))
            .ok_or_else(|| H2Error::Precondition("coarsest multigrid operator is not positive definite".into()))?;
        Ok(Multigrid { sides, levels, coarse })
    }

    /// Grid sides from fine to coarse.
    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn size(&self) -> usize {
        self.sides[0] * self.sides[0]
    }

    /// Fine-grid operator.
    pub fn operator(&self) -> Option<&CsMat<f64>> {
        self.levels.first().map(|l| &l.a)
    }

    /// One V-cycle from a zero initial guess.
    pub fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        self.cycle(0, b)
    }

    fn smooth(level: &Level, b: &[f64], x: &mut [f64], tmp: &mut [f64]) {
        for _ in 0..SWEEPS {
            spmv(&level.a, x, tmp);
            for ((xi, t), (bi, di)) in x.iter_mut().zip(tmp.iter()).zip(b.iter().zip(&level.inv_diag)) {
                *xi += OMEGA * di * (bi - t);
            }
        }
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        let Some(level) = self.levels.get(l) else {
            return self.coarse.solve(&DVector::from_column_slice(b)).as_slice().to_vec();
        };
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut tmp = vec![0.0; n];
        Self::smooth(level, b, &mut x, &mut tmp);
        spmv(&level.a, &x, &mut tmp);
        let res: Vec<f64> = b.iter().zip(&tmp).map(|(bi, t)| bi - t).collect();
        let mut rc = vec![0.0; level.r.rows()];
        spmv(&level.r, &res, &mut rc);
        let ec = self.cycle(l + 1, &rc);
        spmv(&level.p, &ec, &mut tmp);
        for (xi, e) in x.iter_mut().zip(&tmp) {
            *xi += e;
        }
        Self::smooth(level, b, &mut x, &mut tmp);
        x
    }
}
