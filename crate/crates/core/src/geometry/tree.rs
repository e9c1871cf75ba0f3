use std::ops::Range;

use super::{BoundingBox, PointCloud};
use crate::error::{H2Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterNode {
    /// Half-open range into the tree ordering.
    pub begin: usize,
    pub end: usize,
    pub level: usize,
    pub bbox: BoundingBox,
}

impl ClusterNode {
    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.begin..self.end
    }
}

/// Complete binary kd-tree over a point cloud.
///
/// Nodes are stored level by level: node `i` of level `l` has id
/// `2^l - 1 + i` and children `2i`, `2i + 1` on level `l + 1`. All leaves sit
/// on level `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterTree {
    points: PointCloud,
    leaf_size: usize,
    depth: usize,
    permutation: Vec<usize>,
    nodes: Vec<ClusterNode>,
}

/// Smallest `q` with `m * 2^q >= n`.
pub fn depth_for(n: usize, m: usize) -> usize {
    let mut q = 0;
    while m.saturating_mul(1 << q) < n {
        q += 1;
    }
    q
}

impl ClusterTree {
    /// Median kd-tree with leaves of at most `leaf_size` points and depth
    /// `ceil(log2(N / leaf_size))`.
    pub fn build(points: PointCloud, leaf_size: usize) -> Result<Self> {
        if leaf_size == 0 {
            return Err(H2Error::InvalidArgument("leaf size must be positive".into()));
        }
        let depth = depth_for(points.len(), leaf_size);
        Self::build_with_depth(points, depth, leaf_size)
    }

    /// Median kd-tree with a prescribed depth. Used when a column tree has to
    /// line up level by level with a row tree over a different point set.
    pub fn build_with_depth(points: PointCloud, depth: usize, leaf_size: usize) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(H2Error::Structure("empty point cloud".into()));
        }
        if depth >= usize::BITS as usize - 1 {
            return Err(H2Error::InvalidArgument("tree depth too large".into()));
        }
        let mut permutation: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity((2usize << depth) - 1);
        let mut ranges = vec![(0usize, n)];
        for level in 0..=depth {
            let mut next = Vec::with_capacity(ranges.len() * 2);
            for &(b, e) in &ranges {
                let bbox = BoundingBox::of_points(&points, &permutation[b..e]).unwrap_or_else(|| {
                    // empty cluster: park a zero box on the nearest point
                    let anchor = permutation[b.min(n - 1)];
                    BoundingBox::point(points.point(anchor))
                });
                if level < depth {
                    let axis = bbox.longest_axis();
                    permutation[b..e].sort_by(|&i, &j| {
                        points.point(i)[axis].total_cmp(&points.point(j)[axis]).then(i.cmp(&j))
                    });
                    let mid = b + (e - b).div_ceil(2);
                    next.push((b, mid));
                    next.push((mid, e));
                }
                nodes.push(ClusterNode { begin: b, end: e, level, bbox });
            }
            ranges = next;
        }
        let leaf_size = leaf_size.max(nodes[nodes.len() - (1 << depth)..].iter().map(|n| n.len()).max().unwrap_or(0));
        Ok(ClusterTree { points, leaf_size, depth, permutation, nodes })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &PointCloud {
        &self.points
    }

    /// Tree-ordered position -> original point index.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Coordinates of the point at tree position `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        self.points.point(self.permutation[i])
    }

    pub fn level_size(level: usize) -> usize {
        1 << level
    }

    pub fn node_id(level: usize, index: usize) -> usize {
        (1 << level) - 1 + index
    }

    pub fn node(&self, level: usize, index: usize) -> &ClusterNode {
        &self.nodes[Self::node_id(level, index)]
    }

    pub fn level(&self, level: usize) -> &[ClusterNode] {
        let start = (1 << level) - 1;
        &self.nodes[start..start + (1 << level)]
    }

    pub fn leaves(&self) -> &[ClusterNode] {
        self.level(self.depth)
    }

    pub fn nodes(&self) -> &[ClusterNode] {
        &self.nodes
    }

    /// Rebuilds a tree from stored parts (used by the file reader).
    pub fn from_parts(
        points: PointCloud,
        leaf_size: usize,
        depth: usize,
        permutation: Vec<usize>,
        nodes: Vec<ClusterNode>,
    ) -> Result<Self> {
        let tree = ClusterTree { points, leaf_size, depth, permutation, nodes };
        tree.validate()?;
        Ok(tree)
    }

    /// Checks the structural invariants: complete tree, children partition
    /// their parent, and the permutation is a bijection.
    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if self.permutation.len() != n || self.nodes.len() != (2usize << self.depth) - 1 {
            return Err(H2Error::Structure("cluster tree sizes are inconsistent".into()));
        }
        let mut seen = vec![false; n];
        for &p in &self.permutation {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(H2Error::Structure("permutation is not a bijection".into()));
            }
        }
        let root = &self.nodes[0];
        if root.begin != 0 || root.end != n {
            return Err(H2Error::Structure("root does not cover all points".into()));
        }
        for level in 0..self.depth {
            for (i, node) in self.level(level).iter().enumerate() {
                let (a, b) = (self.node(level + 1, 2 * i), self.node(level + 1, 2 * i + 1));
                if a.begin != node.begin || a.end != b.begin || b.end != node.end {
                    return Err(H2Error::Structure(format!("children of node ({level},{i}) do not partition it")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        let pts = PointCloud::new(1, vec![3.0, 1.0, 0.0, 2.0]).unwrap();
        let t = ClusterTree::build(pts, 1).unwrap();
        assert_eq!(t.depth(), 2);
        let leaves: Vec<f64> = t.leaves().iter().map(|l| t.point(l.begin)[0]).collect();
        assert_eq!(leaves, vec![0.0, 1.0, 2.0, 3.0]);
        t.validate().unwrap();
    }

    #[test]
    fn balanced_leaves() {
        let pts = PointCloud::grid(&[8, 8], 1.0).unwrap();
        let t = ClusterTree::build(pts, 16).unwrap();
        assert_eq!(t.depth(), 2);
        assert!(t.leaves().iter().all(|l| l.len() == 16));
    }

    #[test]
    fn grid_leaves_partition_domain() {
        let pts = PointCloud::grid(&[32, 32], 1.0).unwrap();
        let t = ClusterTree::build(pts, 64).unwrap();
        assert_eq!(t.depth(), 4);
        let mut covered = vec![0u8; 1024];
        for leaf in t.leaves() {
            for i in leaf.range() {
                covered[i] += 1;
            }
            // each leaf of a 32x32 grid is an 8x8 block
            assert!((leaf.bbox.extent(0) - 7.0 / 32.0).abs() < 1e-12);
            assert!((leaf.bbox.extent(1) - 7.0 / 32.0).abs() < 1e-12);
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn ragged_sizes_keep_uniform_depth() {
        let pts = PointCloud::grid(&[10, 10], 1.0).unwrap();
        let t = ClusterTree::build(pts, 16).unwrap();
        assert_eq!(t.depth(), 3);
        assert!(t.leaves().iter().all(|l| l.len() <= 16 && l.len() >= 12));
        t.validate().unwrap();
    }

    #[test]
    fn more_leaves_than_points() {
        let pts = PointCloud::new(2, vec![0.0, 0.0, 1.0, 0.0, 2.0, 0.0]).unwrap();
        let t = ClusterTree::build(pts, 1).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.leaves().iter().filter(|l| l.is_empty()).count(), 1);
        t.validate().unwrap();
    }

    #[test]
    fn ties_go_to_lower_index() {
        let pts = PointCloud::new(1, vec![1.0, 1.0, 0.0, 1.0]).unwrap();
        let t = ClusterTree::build(pts, 2).unwrap();
        assert_eq!(t.permutation(), &[2, 0, 1, 3]);
    }
}
