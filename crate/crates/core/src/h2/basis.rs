use nalgebra::DMatrix;

use crate::dense::{product, MatRef, Op};
use crate::error::{structure, Result};
use crate::geometry::ClusterTree;

/// Nested basis: explicit leaf blocks plus one transfer block per node on
/// every level below the root.
///
/// Level `l` has `2^l` nodes, all of rank `ranks[l]`. Leaf `i` is stored
/// column-major as a `leaf_rows(i) x ranks[depth]` block; transfer `(l, i)`
/// is a `ranks[l] x ranks[l-1]` block.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisTree {
    pub depth: usize,
    pub ranks: Vec<usize>,
    /// Row offsets of the leaves, `2^depth + 1` entries.
    pub leaf_begin: Vec<usize>,
    pub leaves: Vec<f64>,
    /// `transfers[0]` is always empty.
    pub transfers: Vec<Vec<f64>>,
}

impl BasisTree {
    /// All-zero basis shaped after `tree` with the given level ranks.
    pub fn zeros(tree: &ClusterTree, ranks: Vec<usize>) -> Result<Self> {
        let mut leaf_begin: Vec<usize> = tree.leaves().iter().map(|l| l.begin).collect();
        leaf_begin.push(tree.len());
        Self::zeros_with_leaves(leaf_begin, ranks)
    }

    pub fn zeros_with_leaves(leaf_begin: Vec<usize>, ranks: Vec<usize>) -> Result<Self> {
        if ranks.is_empty() {
            return structure("basis needs at least one level");
        }
        let depth = ranks.len() - 1;
        if leaf_begin.len() != (1 << depth) + 1 {
            return structure("leaf offsets do not match the basis depth");
        }
        let rows = leaf_begin[leaf_begin.len() - 1] - leaf_begin[0];
        let mut transfers = vec![Vec::new()];
        for l in 1..=depth {
            transfers.push(vec![0.0; (1 << l) * ranks[l] * ranks[l - 1]]);
        }
        Ok(BasisTree { depth, leaves: vec![0.0; rows * ranks[depth]], ranks, leaf_begin, transfers })
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }

    pub fn leaf_rows(&self, i: usize) -> usize {
        self.leaf_begin[i + 1] - self.leaf_begin[i]
    }

    pub fn leaf_range(&self, i: usize) -> std::ops::Range<usize> {
        let k = self.ranks[self.depth];
        let base = self.leaf_begin[0];
        (self.leaf_begin[i] - base) * k..(self.leaf_begin[i + 1] - base) * k
    }

    pub fn leaf(&self, i: usize) -> MatRef<'_> {
        MatRef::new(&self.leaves[self.leaf_range(i)], self.leaf_rows(i), self.ranks[self.depth])
    }

    pub fn leaf_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.leaf_range(i);
        &mut self.leaves[r]
    }

    pub fn transfer_len(&self, level: usize) -> usize {
        self.ranks[level] * self.ranks[level - 1]
    }

    pub fn transfer(&self, level: usize, i: usize) -> MatRef<'_> {
        let len = self.transfer_len(level);
        MatRef::new(&self.transfers[level][i * len..(i + 1) * len], self.ranks[level], self.ranks[level - 1])
    }

    pub fn transfer_mut(&mut self, level: usize, i: usize) -> &mut [f64] {
        let len = self.transfer_len(level);
        &mut self.transfers[level][i * len..(i + 1) * len]
    }

    pub fn stored_len(&self) -> usize {
        self.leaves.len() + self.transfers.iter().map(Vec::len).sum::<usize>()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ranks.len() != self.depth + 1 || self.transfers.len() != self.depth + 1 {
            return structure("basis level arrays do not match the depth");
        }
        if self.leaf_begin.len() != self.leaf_count() + 1 || self.leaf_begin.windows(2).any(|w| w[0] > w[1]) {
            return structure("leaf offsets are not monotone");
        }
        let rows = self.leaf_begin[self.leaf_count()] - self.leaf_begin[0];
        if self.leaves.len() != rows * self.ranks[self.depth] {
            return structure("leaf storage has the wrong size");
        }
        if !self.transfers[0].is_empty() {
            return structure("root carries a transfer block");
        }
        for l in 1..=self.depth {
            if self.transfers[l].len() != (1 << l) * self.transfer_len(l) {
                return structure(format!("level {l} transfer storage has the wrong size"));
            }
        }
        Ok(())
    }

    /// Explicit basis of node `(level, i)`: the leaf blocks below it
    /// multiplied through the transfer chain. Rows follow the tree order.
    pub fn expand(&self, level: usize, i: usize) -> DMatrix<f64> {
        if level == self.depth {
            return self.leaf(i).to_dmatrix();
        }
        let a = self.expand(level + 1, 2 * i);
        let b = self.expand(level + 1, 2 * i + 1);
        let ea = self.transfer(level + 1, 2 * i).to_dmatrix();
        let eb = self.transfer(level + 1, 2 * i + 1).to_dmatrix();
        let k = self.ranks[level];
        let mut out = DMatrix::zeros(a.nrows() + b.nrows(), k);
        out.rows_mut(0, a.nrows()).copy_from(&(a * ea));
        let ar = out.nrows() - b.nrows();
        out.rows_mut(ar, b.nrows()).copy_from(&(b * eb));
        out
    }

    /// Gram matrices `B^T B` of every node, computed by the transfer
    /// recursion from the leaves up. Returned per level, node-major.
    pub fn gram(&self) -> Vec<Vec<DMatrix<f64>>> {
        let leaves = (0..self.leaf_count())
            .map(|i| {
                let u = self.leaf(i);
                DMatrix::from_vec(u.cols, u.cols, product(Op::T, u, u))
            })
            .collect();
        self.gram_from_leaves(leaves)
    }

    /// Same recursion starting from given leaf-level Gram matrices.
    pub fn gram_from_leaves(&self, leaves: Vec<DMatrix<f64>>) -> Vec<Vec<DMatrix<f64>>> {
        let mut out: Vec<Vec<DMatrix<f64>>> = vec![Vec::new(); self.depth + 1];
        out[self.depth] = leaves;
        for l in (1..=self.depth).rev() {
            let parents = (0..1usize << (l - 1))
                .map(|i| {
                    let mut g = DMatrix::zeros(self.ranks[l - 1], self.ranks[l - 1]);
                    for c in [2 * i, 2 * i + 1] {
                        let e = self.transfer(l, c).to_dmatrix();
                        g += e.transpose() * &out[l][c] * e;
                    }
                    g
                })
                .collect();
            out[l - 1] = parents;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BasisTree {
        let mut b = BasisTree::zeros_with_leaves(vec![0, 2, 4], vec![1, 2]).unwrap();
        b.leaves.copy_from_slice(&[1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 2.0]);
        b.transfer_mut(1, 0).copy_from_slice(&[1.0, 1.0]);
        b.transfer_mut(1, 1).copy_from_slice(&[0.5, 0.0]);
        b
    }

    #[test]
    fn expansion_through_transfers() {
        let b = small();
        b.validate().unwrap();
        let root = b.expand(0, 0);
        assert_eq!(root.as_slice(), &[1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn gram_matches_expansion() {
        let b = small();
        let g = b.gram();
        let root = b.expand(0, 0);
        assert!((&g[0][0] - root.transpose() * &root).abs().max() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        let mut b = small();
        b.transfers[1].pop();
        assert!(b.validate().is_err());
        assert!(BasisTree::zeros_with_leaves(vec![0, 1], vec![1, 1]).is_err());
    }
}
