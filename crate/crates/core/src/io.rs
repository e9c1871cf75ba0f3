//! Binary `.h2m` files.
//!
//! Everything is little-endian; counts and indices are `u64`, reals `f64`.
//!
//! ```text
//! magic "H2KM", version u32 (= 1)
//! header   rows, cols, leaf size m, depth q, dim, eta (f64),
//!          row ranks [q+1], col ranks [q+1], shared-tree flag (u8)
//! kernel   tag u8 (0 none, 1 exp, 2 fractional, 3 zero), then
//!          exp: length | fractional: beta, sign, field id (u64)
//! trees    row tree, then the column tree unless shared; each is
//!          leaf size, points (n*dim), permutation [n],
//!          nodes (2^(q+1)-1 of begin, end, lo[dim], hi[dim]) in level order
//! bases    row basis, then column basis: leaf_begin [2^q+1], leaf data,
//!          transfers of levels 1..=q
//! levels   per level 0..=q: block count, row_ptr [2^l+1], cols, data
//! dense    block count, row_ptr [2^q+1], cols, offsets [count+1], data
//! ```
//!
//! Every length-prefixed array stores its length first. Shapes are checked
//! again on load, so a corrupt file gives [`H2Error::Format`] or
//! [`H2Error::Structure`] rather than a panic.

use std::fs;
use std::path::Path;

use crate::construct::{KappaField, KernelSpec};
use crate::error::{H2Error, Result};
use crate::geometry::{BoundingBox, ClusterNode, ClusterTree, PointCloud};
use crate::h2::{BasisTree, CouplingLevel, DenseLayer, H2Matrix};

const MAGIC: &[u8; 4] = b"H2KM";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usizes(&mut self, v: &[usize]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.u64(x));
    }
    fn reals(&mut self, v: &[f64]) {
        self.u64(v.len());
        v.iter().for_each(|&x| self.f64(x));
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(H2Error::Format(msg.into()))
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return bad(format!("unexpected end of file at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).or_else(|_| bad("count does not fit in memory"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// Length prefix, checked against the bytes that are left.
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > (self.buf.len() - self.pos) / 8 {
            return bad(format!("array length {n} exceeds the file size"));
        }
        Ok(n)
    }
    fn usizes(&mut self) -> Result<Vec<usize>> {
        let n = self.len()?;
        (0..n).map(|_| self.u64()).collect()
    }
    fn reals(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn expect_len<T>(v: Vec<T>, n: usize, what: &str) -> Result<Vec<T>> {
        if v.len() != n {
            return bad(format!("{what}: expected {n} entries, found {}", v.len()));
        }
        Ok(v)
    }
}

fn write_tree(w: &mut Writer, t: &ClusterTree) {
    w.u64(t.leaf_size());
    w.reals(t.points().coords());
    w.usizes(t.permutation());
    for n in t.nodes() {
        w.u64(n.begin);
        w.u64(n.end);
        n.bbox.lo.iter().chain(&n.bbox.hi).for_each(|&x| w.f64(x));
    }
}

fn read_tree(r: &mut Reader, dim: usize, depth: usize, n: usize) -> Result<ClusterTree> {
    let leaf_size = r.u64()?;
    let coords = Reader::expect_len(r.reals()?, n * dim, "point coordinates")?;
    let points = PointCloud::new(dim, coords)?;
    let perm = Reader::expect_len(r.usizes()?, n, "permutation")?;
    let count = (2usize << depth) - 1;
    let mut nodes = Vec::with_capacity(count);
    for level in 0..=depth {
        for _ in 0..1usize << level {
            let (begin, end) = (r.u64()?, r.u64()?);
            let lo = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let hi = (0..dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            if begin > end || end > n || lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
                return bad("invalid cluster node");
            }
            nodes.push(ClusterNode { begin, end, level, bbox: BoundingBox { lo, hi } });
        }
    }
    ClusterTree::from_parts(points, leaf_size, depth, perm, nodes)
}

fn write_basis(w: &mut Writer, b: &BasisTree) {
    w.usizes(&b.leaf_begin);
    w.reals(&b.leaves);
    b.transfers.iter().skip(1).for_each(|t| w.reals(t));
}

fn read_basis(r: &mut Reader, ranks: Vec<usize>) -> Result<BasisTree> {
    let q = ranks.len() - 1;
    let leaf_begin = Reader::expect_len(r.usizes()?, (1 << q) + 1, "leaf offsets")?;
    if leaf_begin.windows(2).any(|w| w[0] > w[1]) {
        return bad("leaf offsets are not sorted");
    }
    let mut b = BasisTree::zeros_with_leaves(leaf_begin, ranks)?;
    let leaves = r.reals()?;
    b.leaves = Reader::expect_len(leaves, b.leaves.len(), "leaf basis")?;
    for l in 1..=q {
        let t = r.reals()?;
        b.transfers[l] = Reader::expect_len(t, b.transfers[l].len(), "transfer level")?;
    }
    Ok(b)
}

/// Serializes `a` into the `.h2m` layout.
pub fn to_bytes(a: &H2Matrix) -> Vec<u8> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    let q = a.depth();
    w.u64(a.rows());
    w.u64(a.cols());
    w.u64(a.row_tree().leaf_size());
    w.u64(q);
    w.u64(a.row_tree().dim());
    w.f64(a.eta());
    a.row_ranks().iter().chain(a.col_ranks()).for_each(|&k| w.u64(k));
    let shared = a.row_tree() == a.col_tree();
    w.u8(shared as u8);
    match a.kernel() {
        None => w.u8(0),
        Some(KernelSpec::Exp { length }) => {
            w.u8(1);
            w.f64(length);
        }
        Some(KernelSpec::Frac { beta, sign, field }) => {
            w.u8(2);
            w.f64(beta);
            w.f64(sign);
            w.u64(field.id() as usize);
        }
        Some(KernelSpec::Zero) => w.u8(3),
    }
    write_tree(&mut w, a.row_tree());
    if !shared {
        write_tree(&mut w, a.col_tree());
    }
    write_basis(&mut w, a.row_basis());
    write_basis(&mut w, a.col_basis());
    for c in a.couplings() {
        w.u64(c.len());
        w.usizes(&c.row_ptr);
        w.usizes(&c.cols);
        w.reals(&c.data);
    }
    let d = a.dense();
    w.u64(d.len());
    w.usizes(&d.row_ptr);
    w.usizes(&d.cols);
    w.usizes(&d.offsets);
    w.reals(&d.data);
    w.0
}

/// Parses a `.h2m` buffer; the result is fully validated.
pub fn from_bytes(buf: &[u8]) -> Result<H2Matrix> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return bad("not an h2m file");
    }
    let version = r.u32()?;
    if version != VERSION {
        return bad(format!("unsupported version {version}"));
    }
    let (rows, cols, _m, q, dim) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    if q >= 48 || dim == 0 || dim > 16 {
        return bad(format!("implausible depth {q} or dimension {dim}"));
    }
    let eta = r.f64()?;
    if !(eta > 0.0) {
        return bad(format!("admissibility parameter {eta} is not positive"));
    }
    let row_ranks = (0..=q).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let col_ranks = (0..=q).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
    let shared = match r.u8()? {
        0 => false,
        1 => true,
        f => return bad(format!("bad shared-tree flag {f}")),
    };
    let kernel = match r.u8()? {
        0 => None,
        1 => Some(KernelSpec::Exp { length: r.f64()? }),
        2 => {
            let (beta, sign) = (r.f64()?, r.f64()?);
            let id = r.u64()?;
            let field = KappaField::from_id(id as u32).ok_or_else(|| H2Error::Format(format!("unknown field id {id}")))?;
            Some(KernelSpec::Frac { beta, sign, field })
        }
        3 => Some(KernelSpec::Zero),
        t => return bad(format!("unknown kernel tag {t}")),
    };
    let row_tree = read_tree(&mut r, dim, q, rows)?;
    let col_tree = if shared {
        if rows != cols {
            return bad("shared tree with different row and column counts");
        }
        row_tree.clone()
    } else {
        read_tree(&mut r, dim, q, cols)?
    };
    let u = read_basis(&mut r, row_ranks.clone())?;
    let v = read_basis(&mut r, col_ranks.clone())?;
    let mut couplings = Vec::with_capacity(q + 1);
    for l in 0..=q {
        let nb = r.u64()?;
        let row_ptr = Reader::expect_len(r.usizes()?, (1 << l) + 1, "coupling row pointers")?;
        let cols = Reader::expect_len(r.usizes()?, nb, "coupling columns")?;
        let data = Reader::expect_len(r.reals()?, nb * row_ranks[l] * col_ranks[l], "coupling data")?;
        couplings.push(CouplingLevel { rank_rows: row_ranks[l], rank_cols: col_ranks[l], row_ptr, cols, data });
    }
    let nb = r.u64()?;
    let row_ptr = Reader::expect_len(r.usizes()?, (1 << q) + 1, "dense row pointers")?;
    let dcols = Reader::expect_len(r.usizes()?, nb, "dense columns")?;
    let offsets = Reader::expect_len(r.usizes()?, nb + 1, "dense offsets")?;
    let data = r.reals()?;
    if offsets.last() != Some(&data.len()) {
        return bad("dense offsets do not match the data length");
    }
    if r.pos != buf.len() {
        return bad("trailing bytes after the dense layer");
    }
    let dense = DenseLayer { row_ptr, cols: dcols, offsets, data };
    H2Matrix::from_parts(row_tree, col_tree, u, v, couplings, dense, eta, kernel)
}

pub fn save(a: &H2Matrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(a))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<H2Matrix> {
    from_bytes(&fs::read(path)?)
}
