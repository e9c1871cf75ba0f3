use crate::error::{H2Error, Result};

/// What CG needs from an operator, a preconditioner and an inner product.
/// Vectors are whatever part of the global vector the caller owns; `dot`
/// returns the global value.
pub trait KrylovOps {
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()>;
    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> Result<()>;
    fn dot(&mut self, a: &[f64], b: &[f64]) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcgResult {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `|r_k| / |b|`, starting with `k = 0`.
    pub residuals: Vec<f64>,
    /// `|e_k|_A^2 - |e_{k+1}|_A^2 = alpha_k r_k^T z_k` for every step.
    pub energy_decrease: Vec<f64>,
}

/// Preconditioned CG from a zero initial guess. Stops once
/// `|r| / |b| <= rtol`; running out of iterations is reported through
/// `converged`, a nonpositive curvature `p^T A p` is an error.
pub fn pcg<O: KrylovOps + ?Sized>(ops: &mut O, b: &[f64], rtol: f64, maxit: usize) -> Result<PcgResult> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = ops.dot(b, b)?.sqrt();
    let mut out = PcgResult { u: Vec::new(), iterations: 0, converged: false, residuals: vec![1.0], energy_decrease: Vec::new() };
    if bnorm == 0.0 {
        out.u = x;
        out.converged = true;
        out.residuals[0] = 0.0;
        return Ok(out);
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    ops.precondition(&r, &mut z)?;
    let mut p = z.clone();
    let mut rz = ops.dot(&r, &z)?;
    for k in 0..maxit {
        ops.apply(&p, &mut q)?;
        let pq = ops.dot(&p, &q)?;
        if !(pq > 0.0) {
            return Err(H2Error::Precondition(format!("operator is not positive definite: p^T A p = {pq:e} at step {k}")));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        out.energy_decrease.push(alpha * rz);
        out.iterations = k + 1;
        let rel = ops.dot(&r, &r)?.sqrt() / bnorm;
        out.residuals.push(rel);
        if rel <= rtol {
            out.converged = true;
            break;
        }
        ops.precondition(&r, &mut z)?;
        let rz_next = ops.dot(&r, &z)?;
        if !(rz_next > 0.0) {
            return Err(H2Error::Precondition(format!("preconditioner is not positive definite: r^T z = {rz_next:e}")));
        }
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    out.u = x;
    Ok(out)
}

/// Single-process [`KrylovOps`] from two closures.
pub struct FnOps<A, M> {
    pub apply: A,
    pub precondition: M,
}

impl<A, M> KrylovOps for FnOps<A, M>
where
    A: FnMut(&[f64], &mut [f64]),
    M: FnMut(&[f64], &mut [f64]),
{
    fn apply(&mut self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.apply)(x, y);
        Ok(())
    }

    fn precondition(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        (self.precondition)(r, z);
        Ok(())
    }

    fn dot(&mut self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
    }
}

pub fn identity(r: &[f64], z: &mut [f64]) {
    z.copy_from_slice(r);
}
