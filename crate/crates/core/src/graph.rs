//! Neighborhood graphs and the Laplacian / factor matrices built on them.
//!
//! Graphs come in two flavors: undirected symmetric neighborhoods (used by
//! MEU, LLE, Laplacian eigenmaps and isomap) and acyclic ordered parent
//! sets (used by ALLE). Laplacians are stored as edge lists with the
//! diagonal reconstructed as the row sum, so `L 1 = 0` holds exactly by
//! construction; dense matrices are assembled on demand.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{component_summary, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Undirected,
    Acyclic,
}

/// Per-point neighbor sets.
///
/// Undirected graphs are symmetric with no self loops. Acyclic graphs
/// store, for each point, its parents among strictly larger indices; the
/// last point has none.
#[derive(Debug, Clone)]
pub struct NeighborGraph {
    n: usize,
    kind: GraphKind,
    neighbors: Vec<Vec<usize>>,
    /// Canonical undirected edge list (i < j), sorted; empty for acyclic.
    edges: Vec<(usize, usize)>,
}

impl NeighborGraph {
    pub fn from_neighbor_sets(kind: GraphKind, neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                if j >= n {
                    return Err(Error::DimensionMismatch {
                        context: format!("neighbor index {j} out of range for n={n}"),
                    });
                }
                match kind {
                    GraphKind::Undirected => {
                        if j == i {
                            return Err(Error::DimensionMismatch {
                                context: format!("self loop at {i}"),
                            });
                        }
                        if !neighbors[j].contains(&i) {
                            return Err(Error::DimensionMismatch {
                                context: format!("edge {i}-{j} is not symmetric"),
                            });
                        }
                    }
                    GraphKind::Acyclic => {
                        if j <= i {
                            return Err(Error::DimensionMismatch {
                                context: format!("acyclic neighbor {j} of {i} must exceed it"),
                            });
                        }
                    }
                }
            }
        }
        if kind == GraphKind::Acyclic && n > 0 && !neighbors[n - 1].is_empty() {
            return Err(Error::DimensionMismatch {
                context: "last point of an acyclic graph must have no neighbors".into(),
            });
        }
        let edges = match kind {
            GraphKind::Undirected => {
                let mut e: Vec<(usize, usize)> = Vec::new();
                for (i, nb) in neighbors.iter().enumerate() {
                    for &j in nb {
                        if i < j {
                            e.push((i, j));
                        }
                    }
                }
                e.sort_unstable();
                e
            }
            GraphKind::Acyclic => Vec::new(),
        };
        Ok(Self {
            n,
            kind,
            neighbors,
            edges,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Canonical edge list (i < j) of an undirected graph.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, treating edges as undirected, each sorted,
    /// ordered by their smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut seen = vec![false; self.n];
        let mut components = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            let mut stack = vec![start];
            let mut comp = Vec::new();
            seen[start] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    pub fn is_connected(&self) -> bool {
        self.n <= 1 || self.components().len() == 1
    }

    pub(crate) fn require_undirected(&self) -> Result<()> {
        if self.kind != GraphKind::Undirected {
            return Err(Error::WrongGraphKind {
                expected: "undirected",
            });
        }
        Ok(())
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        let components = self.components();
        if components.len() > 1 {
            return Err(Error::Disconnected {
                summary: component_summary(&components),
            });
        }
        Ok(())
    }
}

/// Indices of the `k` nearest rows to row `i` under squared Euclidean
/// distance, excluding rows in `skip_below` (used for the acyclic variant).
/// Ties break toward the lower index so output is deterministic.
fn nearest_rows(y: &DMatrix<f64>, i: usize, k: usize, lower_bound: Option<usize>) -> Vec<usize> {
    let n = y.nrows();
    let yi = y.row(i);
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .filter(|&j| j != i && lower_bound.is_none_or(|b| j > b))
        .map(|j| {
            let mut d = 0.0;
            let yj = y.row(j);
            for c in 0..y.ncols() {
                let diff = yi[c] - yj[c];
                d += diff * diff;
            }
            (d, j)
        })
        .collect();
    candidates.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    let mut out: Vec<usize> = candidates.into_iter().map(|(_, j)| j).collect();
    out.sort_unstable();
    out
}

/// k-nearest-neighbor graph, symmetrized by union: an edge exists when
/// either endpoint selected the other, so every point ends with degree
/// at least `k`.
pub fn knn_graph(y: &DMatrix<f64>, k: usize) -> Result<NeighborGraph> {
    let n = y.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { n, min: 2 });
    }
    if k < 1 || k > n - 1 {
        return Err(Error::KOutOfRange { k, n });
    }
    let selected: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| nearest_rows(y, i, k, None))
        .collect();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, nb) in selected.iter().enumerate() {
        for &j in nb {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    NeighborGraph::from_neighbor_sets(GraphKind::Undirected, neighbors)
}

/// Acyclic neighbor graph: after relabeling the points by `ordering`,
/// each point takes its `k` nearest among strictly later points. Points
/// near the end take all remaining candidates; the last point has none.
///
/// Neighbor indices refer to positions in the ordering, i.e. to rows of
/// [`permute_rows`]`(y, ordering)`.
pub fn acyclic_graph(y: &DMatrix<f64>, k: usize, ordering: &[usize]) -> Result<NeighborGraph> {
    let n = y.nrows();
    if n < 2 {
        return Err(Error::TooFewPoints { n, min: 2 });
    }
    if k < 1 {
        return Err(Error::KOutOfRange { k, n });
    }
    validate_permutation(ordering, n)?;
    let yp = permute_rows(y, ordering);
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| nearest_rows(&yp, i, k, Some(i)))
        .collect();
    NeighborGraph::from_neighbor_sets(GraphKind::Acyclic, neighbors)
}

pub fn validate_permutation(ordering: &[usize], n: usize) -> Result<()> {
    if ordering.len() != n {
        return Err(Error::InvalidPermutation { n });
    }
    let mut seen = vec![false; n];
    for &r in ordering {
        if r >= n || seen[r] {
            return Err(Error::InvalidPermutation { n });
        }
        seen[r] = true;
    }
    Ok(())
}

/// Rows reordered so row `r` of the output is row `ordering[r]` of `y`.
pub fn permute_rows(y: &DMatrix<f64>, ordering: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(y.nrows(), y.ncols(), |r, c| y[(ordering[r], c)])
}

/// Inverse of [`permute_rows`]: row `ordering[r]` of the output is row `r`
/// of `x`.
pub fn unpermute_rows(x: &DMatrix<f64>, ordering: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for r in 0..x.nrows() {
        for c in 0..x.ncols() {
            out[(ordering[r], c)] = x[(r, c)];
        }
    }
    out
}

/// Symmetric nonnegative edge weights with zero diagonal, supported on the
/// edges of the graph they were built from.
#[derive(Debug, Clone)]
pub struct WeightedAdjacency {
    mat: DMatrix<f64>,
}

impl WeightedAdjacency {
    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat[(i, j)]
    }
}

/// Heat-kernel edge weights `exp(-||y_i - y_j||^2 / (2 sigma^2))`.
pub fn heat_adjacency(
    y: &DMatrix<f64>,
    g: &NeighborGraph,
    sigma: f64,
) -> Result<WeightedAdjacency> {
    g.require_undirected()?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma", format!("must be positive, got {sigma}")));
    }
    if y.nrows() != g.n() {
        return Err(Error::DimensionMismatch {
            context: format!("data has {} rows but graph has {} points", y.nrows(), g.n()),
        });
    }
    let denom = 2.0 * sigma * sigma;
    let mut mat = DMatrix::zeros(g.n(), g.n());
    for &(i, j) in g.edges() {
        let mut d = 0.0;
        for c in 0..y.ncols() {
            let diff = y[(i, c)] - y[(j, c)];
            d += diff * diff;
        }
        let w = (-d / denom).exp();
        mat[(i, j)] = w;
        mat[(j, i)] = w;
    }
    Ok(WeightedAdjacency { mat })
}

/// Unit edge weights: 1 on edges, 0 elsewhere.
pub fn unit_adjacency(g: &NeighborGraph) -> Result<WeightedAdjacency> {
    g.require_undirected()?;
    let mut mat = DMatrix::zeros(g.n(), g.n());
    for &(i, j) in g.edges() {
        mat[(i, j)] = 1.0;
        mat[(j, i)] = 1.0;
    }
    Ok(WeightedAdjacency { mat })
}

/// Diagonal of the degree matrix: `d_i = sum_j a_ij`.
pub fn degree_matrix(a: &WeightedAdjacency) -> DVector<f64> {
    DVector::from_fn(a.n(), |i, _| a.mat.row(i).sum())
}

/// Graph Laplacian stored as Lagrange multipliers on undirected edges.
///
/// Off-diagonal entries are `-lambda_ij`; the diagonal is the row sum of
/// multipliers, so row sums vanish identically. Nonnegative multipliers
/// make the matrix positive semidefinite.
#[derive(Debug, Clone)]
pub struct Laplacian {
    n: usize,
    edges: Vec<(usize, usize)>,
    lambdas: Vec<f64>,
    diag: Vec<f64>,
}

impl Laplacian {
    pub(crate) fn from_raw_parts(
        n: usize,
        edges: Vec<(usize, usize)>,
        lambdas: Vec<f64>,
        diag: Vec<f64>,
    ) -> Self {
        Self {
            n,
            edges,
            lambdas,
            diag,
        }
    }

    fn assemble(n: usize, edges: Vec<(usize, usize)>, lambdas: Vec<f64>) -> Self {
        let mut diag = vec![0.0; n];
        for (&(i, j), &l) in edges.iter().zip(&lambdas) {
            diag[i] += l;
            diag[j] += l;
        }
        Self {
            n,
            edges,
            lambdas,
            diag,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn multipliers(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &l) in self.edges.iter().zip(&self.lambdas) {
            m[(i, j)] = -l;
            m[(j, i)] = -l;
        }
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
        }
        m
    }

    /// `L v` without assembling the dense matrix.
    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::from_fn(self.n, |i, _| self.diag[i] * v[i]);
        for (&(i, j), &l) in self.edges.iter().zip(&self.lambdas) {
            out[i] -= l * v[j];
            out[j] -= l * v[i];
        }
        out
    }
}

/// Laplacian from multipliers aligned with `g.edges()`.
pub fn laplacian_from_multipliers(g: &NeighborGraph, lambdas: &[f64]) -> Result<Laplacian> {
    g.require_undirected()?;
    if lambdas.len() != g.edges().len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "expected {} multipliers (one per edge), got {}",
                g.edges().len(),
                lambdas.len()
            ),
        });
    }
    Ok(Laplacian::assemble(g.n(), g.edges().to_vec(), lambdas.to_vec()))
}

/// Laplacian from `(edge, multiplier)` pairs; every graph edge must be
/// covered exactly once (either endpoint order) and nothing else.
pub fn laplacian_from_pairs(
    g: &NeighborGraph,
    pairs: &[((usize, usize), f64)],
) -> Result<Laplacian> {
    g.require_undirected()?;
    let index: std::collections::BTreeMap<(usize, usize), usize> = g
        .edges()
        .iter()
        .enumerate()
        .map(|(idx, &e)| (e, idx))
        .collect();
    let mut lambdas = vec![None; g.edges().len()];
    for &((a, b), l) in pairs {
        let key = if a < b { (a, b) } else { (b, a) };
        match index.get(&key) {
            Some(&idx) if lambdas[idx].is_none() => lambdas[idx] = Some(l),
            Some(_) => {
                return Err(Error::DimensionMismatch {
                    context: format!("duplicate multiplier for edge {key:?}"),
                })
            }
            None => return Err(Error::EdgeOffGraph { i: a, j: b }),
        }
    }
    let lambdas: Vec<f64> = lambdas
        .into_iter()
        .enumerate()
        .map(|(idx, l)| {
            l.ok_or_else(|| Error::DimensionMismatch {
                context: format!("missing multiplier for edge {:?}", g.edges()[idx]),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Laplacian::assemble(g.n(), g.edges().to_vec(), lambdas))
}

/// Laplacian `L = D - A` of a weighted adjacency.
pub fn laplacian_from_adjacency(a: &WeightedAdjacency) -> Laplacian {
    let n = a.n();
    let mut edges = Vec::new();
    let mut lambdas = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let w = a.mat[(i, j)];
            if w != 0.0 {
                edges.push((i, j));
                lambdas.push(w);
            }
        }
    }
    Laplacian::assemble(n, edges, lambdas)
}

/// Column-sparse factor `M` with `M^T 1 = 0`, so `L = M M^T` is a positive
/// semidefinite Laplacian.
#[derive(Debug, Clone)]
pub struct FactorMatrix {
    n: usize,
    /// Off-diagonal entries per column: `(row, value)`.
    columns: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    lower_triangular: bool,
}

impl FactorMatrix {
    /// Builds a factor whose diagonal is the negated column sum of the
    /// off-diagonal entries, enforcing `M^T 1 = 0` per column.
    pub fn from_columns(n: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        Self::build(n, columns, None, false)
    }

    /// Lower-triangular variant for acyclic graphs. Column `n-1` has no
    /// off-diagonal support; its diagonal is set to `last_diag` instead of
    /// zero so the factor stays invertible.
    pub fn lower_triangular(
        n: usize,
        columns: Vec<Vec<(usize, f64)>>,
        last_diag: f64,
    ) -> Result<Self> {
        Self::build(n, columns, Some(last_diag), true)
    }

    /// Lower-triangular factor with explicit diagonal entries (the
    /// regression-precision parameterization used by ALLE).
    pub fn lower_triangular_with_diag(
        n: usize,
        columns: Vec<Vec<(usize, f64)>>,
        diag: Vec<f64>,
    ) -> Result<Self> {
        if diag.len() != n || columns.len() != n {
            return Err(Error::DimensionMismatch {
                context: "factor diagonal/columns must have length n".into(),
            });
        }
        Self::validate_support(n, &columns, true)?;
        Ok(Self {
            n,
            columns,
            diag,
            lower_triangular: true,
        })
    }

    fn build(
        n: usize,
        columns: Vec<Vec<(usize, f64)>>,
        last_diag: Option<f64>,
        lower_triangular: bool,
    ) -> Result<Self> {
        if columns.len() != n {
            return Err(Error::DimensionMismatch {
                context: format!("expected {n} columns, got {}", columns.len()),
            });
        }
        Self::validate_support(n, &columns, lower_triangular)?;
        let mut diag = vec![0.0; n];
        for (i, col) in columns.iter().enumerate() {
            diag[i] = -col.iter().map(|&(_, v)| v).sum::<f64>();
        }
        if let Some(eps) = last_diag {
            if n > 0 && columns[n - 1].is_empty() {
                diag[n - 1] = eps;
            }
        }
        Ok(Self {
            n,
            columns,
            diag,
            lower_triangular,
        })
    }

    fn validate_support(
        n: usize,
        columns: &[Vec<(usize, f64)>],
        lower_triangular: bool,
    ) -> Result<()> {
        for (i, col) in columns.iter().enumerate() {
            for &(row, _) in col {
                if row >= n || row == i {
                    return Err(Error::DimensionMismatch {
                        context: format!("bad factor entry ({row}, {i})"),
                    });
                }
                if lower_triangular && row < i {
                    return Err(Error::DimensionMismatch {
                        context: format!(
                            "entry ({row}, {i}) above the diagonal in a lower-triangular factor"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_lower_triangular(&self) -> bool {
        self.lower_triangular
    }

    pub(crate) fn replace_diagonal(&mut self, diag: Vec<f64>) {
        self.diag = diag;
    }

    #[cfg(test)]
    pub(crate) fn scale_in_place(&mut self, c: f64) {
        for col in &mut self.columns {
            for entry in col {
                entry.1 *= c;
            }
        }
        for d in &mut self.diag {
            *d *= c;
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, col) in self.columns.iter().enumerate() {
            for &(row, v) in col {
                m[(row, i)] = v;
            }
            m[(i, i)] = self.diag[i];
        }
        m
    }

    /// Dense `M M^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        let m = self.to_dense();
        &m * m.transpose()
    }
}

/// Laplacian `L = M M^T` of a factor matrix, re-expressed on the sparsity
/// pattern of the product (points sharing a neighbor gain an edge). The
/// diagonal is rebuilt as the row sum so `L 1 = 0` holds exactly.
pub fn laplacian_from_factor(m: &FactorMatrix) -> Laplacian {
    let dense = m.gram();
    let n = m.n();
    let mut edges = Vec::new();
    let mut lambdas = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = dense[(i, j)];
            if v != 0.0 {
                edges.push((i, j));
                lambdas.push(-v);
            }
        }
    }
    Laplacian::assemble(n, edges, lambdas)
}
