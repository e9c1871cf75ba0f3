//! Level marshaling: flat lists of equally shaped small products.

use super::{BasisTree, CouplingLevel};
use crate::dense::{add_into, product, MatMut, MatRef, Op};
use crate::error::{structure, Result};

/// Offsets of one product `C[c] += op(A[a]) * B[b]` into three flat buffers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BatchEntry {
    pub a: usize,
    pub b: usize,
    pub c: usize,
}

/// Homogeneous batch of small products. `op(A)` is `rows x inner`, `B` is
/// `inner x cols`. Entries are split into conflict groups by `group_ptr`;
/// no two entries of one group write the same destination.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchPlan {
    pub op: Op,
    pub rows: usize,
    pub cols: usize,
    pub inner: usize,
    pub entries: Vec<BatchEntry>,
    pub group_ptr: Vec<usize>,
}

impl BatchPlan {
    fn new(op: Op, rows: usize, cols: usize, inner: usize) -> Self {
        BatchPlan { op, rows, cols, inner, entries: Vec::new(), group_ptr: vec![0] }
    }

    fn close_group(&mut self) {
        if *self.group_ptr.last().unwrap() != self.entries.len() {
            self.group_ptr.push(self.entries.len());
        }
    }

    pub fn groups(&self) -> usize {
        self.group_ptr.len() - 1
    }

    pub fn group(&self, g: usize) -> &[BatchEntry] {
        &self.entries[self.group_ptr[g]..self.group_ptr[g + 1]]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs the groups in order. Each entry forms its product in a fresh
    /// buffer and then adds it to the destination.
    pub fn execute(&self, a: &[f64], b: &[f64], c: &mut [f64]) -> Result<()> {
        let (ar, ac) = match self.op {
            Op::N => (self.rows, self.inner),
            Op::T => (self.inner, self.rows),
        };
        let (alen, blen, clen) = (ar * ac, self.inner * self.cols, self.rows * self.cols);
        for e in &self.entries {
            if e.a + alen > a.len() || e.b + blen > b.len() || e.c + clen > c.len() {
                return structure("batch entry addresses memory outside its operands");
            }
        }
        for g in 0..self.groups() {
            for e in self.group(g) {
                let p = product(self.op, MatRef::new(&a[e.a..e.a + alen], ar, ac), MatRef::new(&b[e.b..e.b + blen], self.inner, self.cols));
                add_into(&mut MatMut::new(&mut c[e.c..e.c + clen], self.rows, self.cols), &p);
            }
        }
        Ok(())
    }
}

/// Upsweep step from level `level` to its parent: `x^(l-1)_i += F_c^T x^l_c`
/// for both children `c` of every `i`. First children form group 0 and second
/// children group 1.
pub fn marshal_upsweep_level(basis: &BasisTree, level: usize, nv: usize) -> Result<BatchPlan> {
    if level == 0 || level > basis.depth {
        return structure(format!("no transfer level {level} in a basis of depth {}", basis.depth));
    }
    let (k, kp) = (basis.ranks[level], basis.ranks[level - 1]);
    let nodes = 1usize << level;
    if basis.transfers[level].len() != nodes * k * kp {
        return structure(format!("level {level} transfers do not match the level ranks"));
    }
    let mut plan = BatchPlan::new(Op::T, kp, nv, k);
    for child in 0..2 {
        for parent in 0..nodes / 2 {
            let c = 2 * parent + child;
            plan.entries.push(BatchEntry { a: c * k * kp, b: c * k * nv, c: parent * kp * nv });
        }
        plan.close_group();
    }
    Ok(plan)
}

/// Block-sparse product of one level. Group `g` holds every block with
/// ordinal `g`, so there are as many groups as the longest block row.
pub fn marshal_tree_multiply_level(s: &CouplingLevel, nv: usize) -> BatchPlan {
    let (kr, kc) = (s.rank_rows, s.rank_cols);
    let mut plan = BatchPlan::new(Op::N, kr, nv, kc);
    for g in 0..s.max_row_len() {
        for t in 0..s.rows() {
            let r = s.row(t);
            if g < r.len() {
                let b = r.start + g;
                plan.entries.push(BatchEntry { a: b * kr * kc, b: s.cols[b] * kc * nv, c: t * kr * nv });
            }
        }
        plan.close_group();
    }
    plan
}

/// Downsweep step into `level`: `y^l_c += E_c y^(l-1)_parent`. Every child
/// is written once, so a single group suffices.
pub fn marshal_downsweep_level(basis: &BasisTree, level: usize, nv: usize) -> Result<BatchPlan> {
    if level == 0 || level > basis.depth {
        return structure(format!("no transfer level {level} in a basis of depth {}", basis.depth));
    }
    let (k, kp) = (basis.ranks[level], basis.ranks[level - 1]);
    let nodes = 1usize << level;
    if basis.transfers[level].len() != nodes * k * kp {
        return structure(format!("level {level} transfers do not match the level ranks"));
    }
    let mut plan = BatchPlan::new(Op::N, k, nv, kp);
    for c in 0..nodes {
        plan.entries.push(BatchEntry { a: c * k * kp, b: (c / 2) * kp * nv, c: c * k * nv });
    }
    plan.close_group();
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upsweep_groups() {
        let b = BasisTree::zeros_with_leaves(vec![0, 3, 6], vec![2, 3]).unwrap();
        let plan = marshal_upsweep_level(&b, 1, 1).unwrap();
        assert_eq!(plan.entries.len(), 2);
        assert_eq!(plan.groups(), 2);
        assert!(marshal_upsweep_level(&b, 0, 1).is_err());
    }

    #[test]
    fn ordinal_batches() {
        let s = CouplingLevel::from_pairs(2, &[(0, 0), (0, 1), (0, 3), (1, 2)], 1, 1).unwrap();
        let plan = marshal_tree_multiply_level(&s, 1);
        let sizes: Vec<usize> = (0..plan.groups()).map(|g| plan.group(g).len()).collect();
        assert_eq!(sizes, vec![2, 1, 1]);
        for g in 0..plan.groups() {
            let mut dst: Vec<usize> = plan.group(g).iter().map(|e| e.c).collect();
            dst.dedup();
            assert_eq!(dst.len(), plan.group(g).len());
        }
    }

    #[test]
    fn empty_level_plan() {
        let s = CouplingLevel::empty(4, 2, 2);
        let plan = marshal_tree_multiply_level(&s, 3);
        assert!(plan.is_empty());
        let mut y = vec![0.0; 24];
        plan.execute(&[], &[0.0; 24], &mut y).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn execute_matches_row_loop() {
        // 1x1 blocks make the per-row sum easy to write down
        let mut s = CouplingLevel::from_pairs(2, &[(0, 0), (0, 1), (0, 2), (1, 1)], 1, 1).unwrap();
        s.data.copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        let x = [1.0, 10.0, 100.0];
        let mut y = vec![0.0; 2];
        marshal_tree_multiply_level(&s, 1).execute(&s.data, &x, &mut y).unwrap();
        assert_eq!(y, vec![321.0, 40.0]);
    }

    #[test]
    fn out_of_bounds_entry() {
        let s = CouplingLevel::from_pairs(1, &[(0, 0)], 2, 2).unwrap();
        let plan = marshal_tree_multiply_level(&s, 1);
        let mut y = vec![0.0; 2];
        assert!(plan.execute(&s.data, &[0.0; 1], &mut y).is_err());
    }
}
