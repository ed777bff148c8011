//! Pairwise distance matrices, average-linkage dendrograms and flat cuts.

mod dendrogram;
mod matrix;

pub use dendrogram::{agglomerate, ClusterAssignment, Dendrogram, Merge, NodeId, TreeNode};
pub use matrix::{
    distance_matrix_from_str, distance_matrix_to_string, metric_descriptor, pairwise_distances,
    read_distance_matrix, write_distance_matrix, DistanceMatrix,
};
