//! Geometric preprocessing shared by the encoder, the sampler and the metrics.

mod clash;
mod cluster;
mod frame;
mod graph;
mod rbf;
mod surface;
pub mod vec;

pub use clash::{count_clashes, RadiiTable, CLASH_TOLERANCE};
pub use cluster::{inertia, kmeans_pp, VirtualAtomSet};
pub use frame::{pocket_frame, RigidFrame};
pub use graph::{
    build_local_edges, build_unified_graph, knn_edges, EdgeType, LocalEdge, LocalEdgeSet,
    LocalThresholds, NodeKind, UnifiedEdge, UnifiedGraph,
};
pub use rbf::{rbf_expand, RbfConfig};
pub use surface::{
    approximate_ses, exposed_sphere_points, fibonacci_sphere, fit_principal_curvatures,
    residue_properties, select_pocket_residues, shape_index, surface_features, two_ring,
    FeaturizedSurface, ResidueProperties, SesConfig, MIN_FIT_NEIGHBOURS, POCKET_CUTOFF,
};
