//! Small dense kernels on column-major storage.
//!
//! Every product used by the matvec paths goes through these loops, which
//! have a fixed summation order. Two calls with bitwise-equal operands give
//! bitwise-equal results no matter which rank or thread performs them; the
//! distributed equivalence tests depend on that.
//!
//! QR and SVD are delegated to `nalgebra` and wrapped with a sign convention
//! so that factors are reproducible.

use nalgebra::DMatrix;

/// Borrowed column-major matrix with leading dimension `ld`.
#[derive(Clone, Copy, Debug)]
pub struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

#[derive(Debug)]
pub struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub rows: usize,
    pub cols: usize,
    pub ld: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        MatRef { data, rows, cols, ld: rows.max(1) }
    }

    pub fn with_ld(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Self {
        MatRef { data, rows, cols, ld }
    }

    #[inline(always)]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.ld]
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.at(i, j))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.at(i, j));
            }
        }
        out
    }
}

impl<'a> MatMut<'a> {
    pub fn new(data: &'a mut [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        MatMut { data, rows, cols, ld: rows.max(1) }
    }

    pub fn with_ld(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Self {
        MatMut { data, rows, cols, ld }
    }

    #[inline(always)]
    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.ld] += v;
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef { data: self.data, rows: self.rows, cols: self.cols, ld: self.ld }
    }
}

/// Transposition flag for the left operand of a product.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    N,
    T,
}

/// `out = op(a) * b` written into a fresh contiguous buffer.
pub fn product(op: Op, a: MatRef, b: MatRef) -> Vec<f64> {
    let (m, inner) = match op {
        Op::N => (a.rows, a.cols),
        Op::T => (a.cols, a.rows),
    };
    assert_eq!(inner, b.rows, "inner dimension mismatch");
    let n = b.cols;
    let mut out = vec![0.0; m * n];
    if inner == 0 {
        return out;
    }
    match op {
        Op::N => {
            for j in 0..n {
                let col = &mut out[j * m..(j + 1) * m];
                for p in 0..inner {
                    let bpj = b.at(p, j);
                    if bpj == 0.0 {
                        continue;
                    }
                    let acol = &a.data[p * a.ld..p * a.ld + m];
                    for (o, &av) in col.iter_mut().zip(acol) {
                        *o += av * bpj;
                    }
                }
            }
        }
        Op::T => {
            for j in 0..n {
                let bcol = &b.data[j * b.ld..j * b.ld + inner];
                for i in 0..m {
                    let acol = &a.data[i * a.ld..i * a.ld + inner];
                    let mut s = 0.0;
                    for (&av, &bv) in acol.iter().zip(bcol) {
                        s += av * bv;
                    }
                    out[i + j * m] = s;
                }
            }
        }
    }
    out
}

/// `c += op(a) * b`, evaluated as a fresh product followed by one addition
/// per entry.
pub fn product_acc(op: Op, a: MatRef, b: MatRef, c: &mut MatMut) {
    let p = product(op, a, b);
    add_into(c, &p);
}

/// `c += p` where `p` is contiguous with the shape of `c`.
pub fn add_into(c: &mut MatMut, p: &[f64]) {
    debug_assert_eq!(p.len(), c.rows * c.cols);
    for j in 0..c.cols {
        for i in 0..c.rows {
            c.add(i, j, p[i + j * c.rows]);
        }
    }
}

/// Contiguous column-major `a * b^T`.
pub fn product_nt(a: MatRef, b: MatRef) -> Vec<f64> {
    assert_eq!(a.cols, b.cols);
    let (m, n) = (a.rows, b.rows);
    let mut out = vec![0.0; m * n];
    for j in 0..n {
        for p in 0..a.cols {
            let bjp = b.at(j, p);
            if bjp == 0.0 {
                continue;
            }
            for i in 0..m {
                out[i + j * m] += a.at(i, p) * bjp;
            }
        }
    }
    out
}

/// Copies `src` (rows x cols) into the top-left corner of a zeroed
/// `rows_out x cols_out` buffer.
pub fn pad(src: MatRef, rows_out: usize, cols_out: usize) -> Vec<f64> {
    assert!(src.rows <= rows_out && src.cols <= cols_out);
    let mut out = vec![0.0; rows_out * cols_out];
    for j in 0..src.cols {
        for i in 0..src.rows {
            out[i + j * rows_out] = src.at(i, j);
        }
    }
    out
}

pub fn dmatrix_to_vec(m: &DMatrix<f64>) -> Vec<f64> {
    m.as_slice().to_vec()
}

/// Thin QR with non-negative `R` diagonal. `Q` is `m x n` and `R` is `n x n`;
/// when `m < n` the missing columns of `Q` and rows of `R` are zero.
pub fn qr_thin(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    let mut q_out = DMatrix::zeros(m, n);
    let mut r_out = DMatrix::zeros(n, n);
    if m == 0 || n == 0 {
        return (q_out, r_out);
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let kmin = m.min(n);
    for i in 0..kmin {
        let s = if r[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            r_out[(i, j)] = s * r[(i, j)];
        }
        for row in 0..m {
            q_out[(row, i)] = s * q[(row, i)];
        }
    }
    (q_out, r_out)
}

/// Upper-triangular `n x n` factor of a QR of `a` (rows may be fewer than `n`).
pub fn qr_r(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut r_out = DMatrix::zeros(n, n);
    if m == 0 || n == 0 {
        return r_out;
    }
    let r = a.clone().qr().r();
    for i in 0..m.min(n) {
        let s = if r[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            r_out[(i, j)] = s * r[(i, j)];
        }
    }
    r_out
}

/// Sorted, sign-fixed SVD.
pub struct Svd {
    /// `m x r` left singular vectors, `r = min(m, n)`.
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// `r x n`.
    pub vt: DMatrix<f64>,
}

/// SVD with singular values in descending order and each left singular
/// vector's first significant entry made positive.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return Svd { u: DMatrix::zeros(m, 0), sigma: vec![], vt: DMatrix::zeros(0, n) };
    }
    let dec = a.clone().svd(true, true);
    let mut u = dec.u.expect("left singular vectors requested");
    let mut vt = dec.v_t.expect("right singular vectors requested");
    let mut sigma: Vec<f64> = dec.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]).then(x.cmp(&y)));
    if order.iter().enumerate().any(|(i, &o)| i != o) {
        let u0 = u.clone();
        let vt0 = vt.clone();
        let s0 = sigma.clone();
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &u0.column(src));
            vt.set_row(dst, &vt0.row(src));
            sigma[dst] = s0[src];
        }
    }
    for c in 0..r {
        let col = u.column(c);
        let amax = col.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let first = col.iter().copied().find(|v| v.abs() > 1e-12 * amax).unwrap_or(0.0);
        if first < 0.0 {
            for i in 0..m {
                u[(i, c)] = -u[(i, c)];
            }
            for j in 0..n {
                vt[(c, j)] = -vt[(c, j)];
            }
        }
    }
    Svd { u, sigma, vt }
}
