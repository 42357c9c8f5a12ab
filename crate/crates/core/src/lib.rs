//! Manifold learning through Gaussian random fields over data points.
//!
//! The toolkit treats spectral dimensionality reduction as estimation in a
//! Gaussian random field whose precision is a graph Laplacian over the
//! data points: maximum entropy unfolding fits edge multipliers by
//! maximum likelihood, locally linear embedding is the pseudolikelihood
//! approximation of the same field, its acyclic variant makes the
//! likelihood exact, Laplacian eigenmaps and isomap plug fixed
//! parameterizations into the same classical-scaling stage, and DRILL
//! learns the graph itself through an L1-penalized precision fit. A
//! Gaussian-process regression score ranks the resulting embeddings.

pub mod datasets;
pub mod error;
pub mod eval;
pub mod graph;
pub mod models;
pub mod spectral;

pub use error::{Error, Result};
pub use graph::{
    acyclic_graph, degree_matrix, heat_adjacency, knn_graph, laplacian_from_adjacency,
    laplacian_from_factor, laplacian_from_multipliers, laplacian_from_pairs, permute_rows,
    unpermute_rows, FactorMatrix, GraphKind, Laplacian, NeighborGraph, WeightedAdjacency,
};
pub use spectral::{
    center, cmds_embed, distances_to_similarities, expected_squared_distances, gen_eig,
    kernel_pca, squared_distances, sym_eig, Embedding, EmbeddingDiagnostics, Kernel, MethodTag,
};
