use super::{admissible, ClusterTree};
use crate::error::{H2Error, Result};

/// Block partition produced by a dual tree traversal.
///
/// `lowrank[l]` lists the admissible pairs `(t, s)` found on level `l`,
/// `inner[l]` the inadmissible pairs that were subdivided, and `dense` the
/// inadmissible leaf pairs. All lists are sorted by `(t, s)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockStructure {
    pub depth: usize,
    pub lowrank: Vec<Vec<(usize, usize)>>,
    pub inner: Vec<Vec<(usize, usize)>>,
    pub dense: Vec<(usize, usize)>,
}

impl BlockStructure {
    fn empty(depth: usize) -> Self {
        BlockStructure {
            depth,
            lowrank: vec![Vec::new(); depth + 1],
            inner: vec![Vec::new(); depth + 1],
            dense: Vec::new(),
        }
    }

    /// Largest number of low-rank blocks in any block row of level `l`.
    pub fn level_sparsity(&self, level: usize) -> usize {
        max_row_count(self.lowrank[level].iter().map(|&(t, _)| t))
    }

    /// Sparsity constant: the largest number of matrix-tree leaves (low-rank
    /// blocks plus, on the leaf level, dense blocks) in any block row of any
    /// level.
    pub fn sparsity_constant(&self) -> usize {
        let mut best = 0;
        for level in 0..=self.depth {
            let mut rows: Vec<usize> = self.lowrank[level].iter().map(|&(t, _)| t).collect();
            if level == self.depth {
                rows.extend(self.dense.iter().map(|&(t, _)| t));
            }
            rows.sort_unstable();
            best = best.max(max_row_count(rows.into_iter()));
        }
        best
    }

    pub fn lowrank_count(&self) -> usize {
        self.lowrank.iter().map(Vec::len).sum()
    }

    fn sort(&mut self) {
        for l in self.lowrank.iter_mut().chain(self.inner.iter_mut()) {
            l.sort_unstable();
        }
        self.dense.sort_unstable();
    }
}

fn max_row_count(sorted_rows: impl Iterator<Item = usize>) -> usize {
    let mut best = 0;
    let mut cur = 0;
    let mut last = None;
    for t in sorted_rows {
        if Some(t) == last {
            cur += 1;
        } else {
            cur = 1;
            last = Some(t);
        }
        best = best.max(cur);
    }
    best
}

/// Simultaneous descent of both trees from their roots.
pub fn dual_tree_traversal(rows: &ClusterTree, cols: &ClusterTree, eta: f64) -> Result<BlockStructure> {
    traverse_from(rows, cols, eta, 0, &[(0, 0)])
}

/// Dual traversal seeded with the pairs `start` on `level`. Admissible pairs
/// become low-rank blocks, inadmissible leaf pairs dense blocks, and every
/// other pair is split into its four child pairs. Pairs involving an empty
/// cluster are dropped.
pub fn traverse_from(
    rows: &ClusterTree,
    cols: &ClusterTree,
    eta: f64,
    level: usize,
    start: &[(usize, usize)],
) -> Result<BlockStructure> {
    if rows.depth() != cols.depth() {
        return Err(H2Error::Structure(format!(
            "row tree depth {} differs from column tree depth {}",
            rows.depth(),
            cols.depth()
        )));
    }
    if !(eta > 0.0) {
        return Err(H2Error::InvalidArgument("eta must be positive".into()));
    }
    let depth = rows.depth();
    if level > depth {
        return Err(H2Error::Structure("traversal seeded below the leaf level".into()));
    }
    let mut out = BlockStructure::empty(depth);
    let mut frontier: Vec<(usize, usize)> = start.to_vec();
    for l in level..=depth {
        let mut next = Vec::new();
        for &(t, s) in &frontier {
            let (tn, sn) = (rows.node(l, t), cols.node(l, s));
            if tn.is_empty() || sn.is_empty() {
                continue;
            }
            if admissible(&tn.bbox, &sn.bbox, eta) {
                out.lowrank[l].push((t, s));
            } else if l == depth {
                out.dense.push((t, s));
            } else {
                out.inner[l].push((t, s));
                for a in 0..2 {
                    for b in 0..2 {
                        next.push((2 * t + a, 2 * s + b));
                    }
                }
            }
        }
        frontier = next;
    }
    out.sort();
    Ok(out)
}

/// Number of structure blocks covering each matrix entry, for exhaustive
/// partition checks on small problems. Indices are in tree order.
pub fn coverage_counts(rows: &ClusterTree, cols: &ClusterTree, st: &BlockStructure) -> Vec<u8> {
    let (n, m) = (rows.len(), cols.len());
    let mut counts = vec![0u8; n * m];
    let mut mark = |tr: std::ops::Range<usize>, sr: std::ops::Range<usize>| {
        for i in tr {
            for j in sr.clone() {
                counts[i * m + j] = counts[i * m + j].saturating_add(1);
            }
        }
    };
    for (l, blocks) in st.lowrank.iter().enumerate() {
        for &(t, s) in blocks {
            mark(rows.node(l, t).range(), cols.node(l, s).range());
        }
    }
    for &(t, s) in &st.dense {
        mark(rows.node(st.depth, t).range(), cols.node(st.depth, s).range());
    }
    counts
}
