use crate::dense::MatRef;
use crate::error::{structure, Result};

/// One level of the matrix tree: block-sparse rows of `rank_rows x rank_cols`
/// coupling blocks.
///
/// Block rows are stored CSR-style with ascending column ids; the position
/// of a block within its row is its ordinal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CouplingLevel {
    pub rank_rows: usize,
    pub rank_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub data: Vec<f64>,
}

impl CouplingLevel {
    /// Empty level with `rows` block rows.
    pub fn empty(rows: usize, rank_rows: usize, rank_cols: usize) -> Self {
        CouplingLevel { rank_rows, rank_cols, row_ptr: vec![0; rows + 1], cols: Vec::new(), data: Vec::new() }
    }

    /// Builds the CSR layout from `(t, s)` pairs sorted by row then column;
    /// block data is zero.
    pub fn from_pairs(rows: usize, pairs: &[(usize, usize)], rank_rows: usize, rank_cols: usize) -> Result<Self> {
        let mut row_ptr = vec![0; rows + 1];
        for w in pairs.windows(2) {
            if w[0] >= w[1] {
                return structure("coupling pairs must be sorted and unique");
            }
        }
        for &(t, _) in pairs {
            if t >= rows {
                return structure("coupling row out of range");
            }
            row_ptr[t + 1] += 1;
        }
        for t in 0..rows {
            row_ptr[t + 1] += row_ptr[t];
        }
        let cols = pairs.iter().map(|&(_, s)| s).collect();
        let data = vec![0.0; pairs.len() * rank_rows * rank_cols];
        Ok(CouplingLevel { rank_rows, rank_cols, row_ptr, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn block_len(&self) -> usize {
        self.rank_rows * self.rank_cols
    }

    pub fn row(&self, t: usize) -> std::ops::Range<usize> {
        self.row_ptr[t]..self.row_ptr[t + 1]
    }

    pub fn block(&self, b: usize) -> MatRef<'_> {
        let len = self.block_len();
        MatRef::new(&self.data[b * len..(b + 1) * len], self.rank_rows, self.rank_cols)
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let len = self.block_len();
        &mut self.data[b * len..(b + 1) * len]
    }

    /// Index of block `(t, s)` if present.
    pub fn find(&self, t: usize, s: usize) -> Option<usize> {
        let r = self.row(t);
        self.cols[r.clone()].binary_search(&s).ok().map(|o| r.start + o)
    }

    /// `(t, s)` pairs in storage order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.rows()).flat_map(|t| self.row(t).map(move |b| (t, self.cols[b]))).collect()
    }

    /// Largest number of blocks in one block row.
    pub fn max_row_len(&self) -> usize {
        (0..self.rows()).map(|t| self.row(t).len()).max().unwrap_or(0)
    }

    pub fn validate(&self, col_count: usize) -> Result<()> {
        if self.row_ptr.first() != Some(&0) || self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return structure("coupling row pointers are not monotone");
        }
        if *self.row_ptr.last().unwrap() != self.cols.len() || self.data.len() != self.cols.len() * self.block_len() {
            return structure("coupling storage has the wrong size");
        }
        for t in 0..self.rows() {
            let c = &self.cols[self.row(t)];
            if c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|&s| s >= col_count) {
                return structure(format!("block row {t} has unsorted or out-of-range columns"));
            }
        }
        Ok(())
    }
}

/// Leaf-level dense blocks in block CSR form. Block `b` holds
/// `rows(t) x cols(s)` entries column-major starting at `offsets[b]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DenseLayer {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub offsets: Vec<usize>,
    pub data: Vec<f64>,
}

impl DenseLayer {
    /// Zeroed layer for sorted `pairs`; `row_len(t)` and `col_len(s)` give
    /// the leaf sizes.
    pub fn from_pairs(
        rows: usize,
        pairs: &[(usize, usize)],
        row_len: impl Fn(usize) -> usize,
        col_len: impl Fn(usize) -> usize,
    ) -> Result<Self> {
        let shape = CouplingLevel::from_pairs(rows, pairs, 0, 0)?;
        let mut offsets = Vec::with_capacity(pairs.len() + 1);
        let mut off = 0;
        for &(t, s) in pairs {
            offsets.push(off);
            off += row_len(t) * col_len(s);
        }
        offsets.push(off);
        Ok(DenseLayer { row_ptr: shape.row_ptr, cols: shape.cols, offsets, data: vec![0.0; off] })
    }

    pub fn rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn row(&self, t: usize) -> std::ops::Range<usize> {
        self.row_ptr[t]..self.row_ptr[t + 1]
    }

    pub fn block(&self, b: usize, rows: usize, cols: usize) -> MatRef<'_> {
        MatRef::new(&self.data[self.offsets[b]..self.offsets[b + 1]], rows, cols)
    }

    pub fn block_mut(&mut self, b: usize) -> &mut [f64] {
        let r = self.offsets[b]..self.offsets[b + 1];
        &mut self.data[r]
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (0..self.rows()).flat_map(|t| self.row(t).map(move |b| (t, self.cols[b]))).collect()
    }

    pub fn validate(&self, row_len: impl Fn(usize) -> usize, col_len: impl Fn(usize) -> usize) -> Result<()> {
        if self.offsets.len() != self.cols.len() + 1 || *self.row_ptr.last().unwrap_or(&0) != self.cols.len() {
            return structure("dense layer index arrays are inconsistent");
        }
        for t in 0..self.rows() {
            for b in self.row(t) {
                if self.offsets[b + 1] - self.offsets[b] != row_len(t) * col_len(self.cols[b]) {
                    return structure(format!("dense block ({t},{}) has the wrong size", self.cols[b]));
                }
            }
        }
        if self.offsets.last() != Some(&self.data.len()) {
            return structure("dense layer storage has the wrong size");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csr_from_pairs() {
        let lvl = CouplingLevel::from_pairs(3, &[(0, 1), (0, 2), (2, 0)], 2, 3).unwrap();
        assert_eq!(lvl.row_ptr, vec![0, 2, 2, 3]);
        assert_eq!(lvl.find(0, 2), Some(1));
        assert_eq!(lvl.find(1, 0), None);
        assert_eq!(lvl.data.len(), 18);
        assert_eq!(lvl.max_row_len(), 2);
        lvl.validate(3).unwrap();
        assert!(lvl.validate(2).is_err());
        assert!(CouplingLevel::from_pairs(3, &[(0, 2), (0, 1)], 1, 1).is_err());
    }

    #[test]
    fn dense_offsets() {
        let d = DenseLayer::from_pairs(2, &[(0, 0), (1, 0), (1, 1)], |t| t + 1, |s| s + 2).unwrap();
        assert_eq!(d.offsets, vec![0, 2, 6, 12]);
        d.validate(|t| t + 1, |s| s + 2).unwrap();
        assert_eq!(d.pairs(), vec![(0, 0), (1, 0), (1, 1)]);
    }
}
