//! Isomap: geodesic distances through the neighborhood graph, squared
//! elementwise, then classical multidimensional scaling. The filled-in
//! distances need not be Euclidean, so the implied similarity matrix can
//! have negative eigenvalues; their mass is reported in the embedding
//! diagnostics.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{component_summary, Error, Result};
use crate::graph::NeighborGraph;
use crate::models::FitWarning;
use crate::spectral::{cmds_embed_tagged, distances_to_similarities, Embedding, MethodTag};

#[derive(Debug, Clone)]
pub struct IsomapResult {
    pub embedding: Embedding,
    /// Original indices of the points that were embedded. Identical to
    /// `0..n` when the graph is connected; restricted to the largest
    /// component otherwise.
    pub kept: Vec<usize>,
    pub warnings: Vec<FitWarning>,
}

struct HeapEntry {
    dist: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.dist == other.dist && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap on distance; ties break on node index.
        other
            .dist
            .total_cmp(&self.dist)
            .then(other.node.cmp(&self.node))
    }
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry {
        dist: 0.0,
        node: source,
    });
    while let Some(HeapEntry { dist: d, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        for &(next, len) in &adj[node] {
            let candidate = d + len;
            if candidate < dist[next] {
                dist[next] = candidate;
                heap.push(HeapEntry {
                    dist: candidate,
                    node: next,
                });
            }
        }
    }
    dist
}

fn edge_lengths(y: &DMatrix<f64>, g: &NeighborGraph) -> Vec<Vec<(usize, f64)>> {
    let n = g.n();
    let mut adj = vec![Vec::new(); n];
    for &(i, j) in g.edges() {
        let mut d = 0.0;
        for c in 0..y.ncols() {
            let diff = y[(i, c)] - y[(j, c)];
            d += diff * diff;
        }
        let len = d.sqrt();
        adj[i].push((j, len));
        adj[j].push((i, len));
    }
    adj
}

/// All-pairs geodesic distances through the neighborhood graph (edge
/// lengths are Euclidean distances between neighboring rows), by one
/// Dijkstra run per source. Requires a connected graph.
pub fn geodesic_distances(y: &DMatrix<f64>, g: &NeighborGraph) -> Result<DMatrix<f64>> {
    g.require_undirected()?;
    g.require_connected()?;
    let n = g.n();
    let adj = edge_lengths(y, g);
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(&adj, s)).collect();
    let mut d = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            d[(i, j)] = v;
        }
    }
    Ok(d)
}

/// Geodesic CMDS embedding. A disconnected graph is an error in `strict`
/// mode; otherwise the embedding is restricted to the largest component
/// (ties broken toward the one containing the smallest index) and the
/// index map is returned alongside a warning.
pub fn isomap(y: &DMatrix<f64>, g: &NeighborGraph, q: usize, strict: bool) -> Result<IsomapResult> {
    g.require_undirected()?;
    let components = g.components();
    let mut warnings = Vec::new();
    let (yk, gk, kept) = if components.len() == 1 {
        (y.clone(), g.clone(), (0..g.n()).collect::<Vec<_>>())
    } else {
        if strict {
            return Err(Error::Disconnected {
                summary: component_summary(&components),
            });
        }
        let largest = components
            .iter()
            .max_by_key(|c| c.len())
            .expect("at least one component")
            .clone();
        warnings.push(FitWarning::ComponentsDropped {
            kept: largest.len(),
            total: g.n(),
        });
        let mut index_of = vec![usize::MAX; g.n()];
        for (new, &old) in largest.iter().enumerate() {
            index_of[old] = new;
        }
        let sub_y = DMatrix::from_fn(largest.len(), y.ncols(), |r, c| y[(largest[r], c)]);
        let neighbors: Vec<Vec<usize>> = largest
            .iter()
            .map(|&old| {
                g.neighbors(old)
                    .iter()
                    .filter(|&&j| index_of[j] != usize::MAX)
                    .map(|&j| index_of[j])
                    .collect()
            })
            .collect();
        let sub_g =
            NeighborGraph::from_neighbor_sets(crate::graph::GraphKind::Undirected, neighbors)?;
        (sub_y, sub_g, largest)
    };

    let geodesics = geodesic_distances(&yk, &gk)?;
    let squared = geodesics.map(|v| v * v);
    let b = distances_to_similarities(&squared);
    let embedding = cmds_embed_tagged(&b, q, MethodTag::Isomap)?;
    Ok(IsomapResult {
        embedding,
        kept,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::knn_graph;
    use crate::spectral::kernel_pca;

    #[test]
    fn chain_geodesic_is_path_sum() {
        let y = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let g = knn_graph(&y, 1).unwrap();
        let d = geodesic_distances(&y, &g).unwrap();
        assert!((d[(0, 2)] - 2.0).abs() < 1e-12);
        let res = isomap(&y, &g, 1, true).unwrap();
        assert_eq!(res.kept, vec![0, 1, 2]);
        // Squared geodesic between the ends is 4 and CMDS reproduces it.
        let emb = res.embedding;
        let recovered = (emb.coords[(0, 0)] - emb.coords[(2, 0)]).powi(2);
        assert!((recovered - 4.0).abs() < 1e-8);
    }

    #[test]
    fn complete_graph_reduces_to_pca() {
        let y = DMatrix::from_fn(8, 3, |i, j| ((i as f64 + 1.0) * (j as f64 + 0.5)).sin());
        let g = knn_graph(&y, 7).unwrap();
        let res = isomap(&y, &g, 2, true).unwrap();
        let pca = kernel_pca(&y, crate::spectral::Kernel::Linear, 2).unwrap();
        // Identical pipelines up to the sign convention, which is shared.
        assert!((&res.embedding.coords - &pca.coords).amax() < 1e-8);
    }

    #[test]
    fn disconnected_strict_errors_lenient_keeps_largest() {
        let y = DMatrix::from_row_slice(5, 1, &[0.0, 0.1, 0.2, 10.0, 10.1]);
        let g = knn_graph(&y, 1).unwrap();
        assert!(matches!(
            isomap(&y, &g, 1, true),
            Err(Error::Disconnected { .. })
        ));
        let res = isomap(&y, &g, 1, false).unwrap();
        assert_eq!(res.kept, vec![0, 1, 2]);
        assert_eq!(res.embedding.n(), 3);
    }

    #[test]
    fn negative_mass_reported_on_bent_chain() {
        // A sharply bent chain: geodesics are additive along the path but
        // the turn makes them non-Euclidean.
        let y = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let g = knn_graph(&y, 1).unwrap();
        let res = isomap(&y, &g, 2, true).unwrap();
        assert!(res.embedding.diagnostics.negative_mass >= 0.0);
    }
}
