//! Point sets, cluster trees and block partitions.

mod bbox;
mod points;
mod structure;
mod tree;

pub use bbox::{admissible, BoundingBox};
pub use points::PointCloud;
pub use structure::{coverage_counts, dual_tree_traversal, traverse_from, BlockStructure};
pub use tree::{depth_for, ClusterNode, ClusterTree};
