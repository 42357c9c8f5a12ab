//! Locally linear embedding: per-point regression weights that
//! reconstruct each point from its neighbors under a sum-to-one
//! constraint, followed by an eigenvalue problem on `M M^T` with
//! `M = I - W`. Fitting the weights this way maximizes the
//! pseudolikelihood of the Gaussian random field whose precision
//! factorizes through `M`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{FactorMatrix, NeighborGraph};
use crate::spectral::{sym_eig, Embedding, EmbeddingDiagnostics, MethodTag};

/// Reconstruction weights per point, each set summing to one, plus the
/// per-point regression precision (fixed at 1 for standard LLE).
#[derive(Debug, Clone)]
pub struct LleWeights {
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
    pub precisions: Vec<f64>,
}

impl LleWeights {
    pub fn n(&self) -> usize {
        self.neighbors.len()
    }
}

/// Solves one local regression: weights over `parents` reconstructing
/// row `i`, normalized to sum to one. Returns the weights and the squared
/// reconstruction residual.
///
/// The system matrix is the local Gram matrix of neighbor offsets
/// `C_jk = (y_j - y_i) . (y_k - y_i)`; the minimizer direction is
/// `C^{-1} 1`. A relative-trace ridge keeps the solve well posed when the
/// neighborhood outnumbers the feature dimension.
pub(crate) fn local_regression(
    y: &DMatrix<f64>,
    i: usize,
    parents: &[usize],
    ridge: f64,
) -> Result<(Vec<f64>, f64)> {
    let k = parents.len();
    let p = y.ncols();
    let mut c = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut dot = 0.0;
            for f in 0..p {
                dot += (y[(parents[a], f)] - y[(i, f)]) * (y[(parents[b], f)] - y[(i, f)]);
            }
            c[(a, b)] = dot;
            c[(b, a)] = dot;
        }
    }
    let trace = c.trace();
    let reg = if ridge > 0.0 {
        if trace > 0.0 {
            ridge * trace / k as f64
        } else {
            ridge
        }
    } else {
        0.0
    };
    for a in 0..k {
        c[(a, a)] += reg;
    }
    let chol = match c.cholesky() {
        Some(ch) => ch,
        None => return Err(Error::SingularLocalSystem { point: i }),
    };
    let w_tilde = chol.solve(&DVector::from_element(k, 1.0));
    let sum: f64 = w_tilde.sum();
    if !(sum.abs() > 0.0) || !sum.is_finite() {
        return Err(Error::SingularLocalSystem { point: i });
    }
    let weights: Vec<f64> = w_tilde.iter().map(|v| v / sum).collect();
    let mut residual = 0.0;
    for f in 0..p {
        let mut recon = 0.0;
        for (a, &j) in parents.iter().enumerate() {
            recon += weights[a] * y[(j, f)];
        }
        residual += (y[(i, f)] - recon).powi(2);
    }
    Ok((weights, residual))
}

/// Reconstruction weights for every point of an undirected neighborhood.
pub fn lle_weights(y: &DMatrix<f64>, g: &NeighborGraph, ridge: f64) -> Result<LleWeights> {
    g.require_undirected()?;
    if y.nrows() != g.n() {
        return Err(Error::DimensionMismatch {
            context: format!("data has {} rows but graph has {} points", y.nrows(), g.n()),
        });
    }
    if ridge < 0.0 {
        return Err(Error::invalid("ridge", "must be nonnegative"));
    }
    let n = g.n();
    let mut neighbors = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let nb = g.neighbors(i);
        if nb.is_empty() {
            return Err(Error::EmptyNeighborhood { point: i });
        }
        let (w, _) = local_regression(y, i, nb, ridge)?;
        neighbors.push(nb.to_vec());
        weights.push(w);
    }
    Ok(LleWeights {
        neighbors,
        weights,
        precisions: vec![1.0; n],
    })
}

/// Factor `M = I - W`: unit diagonal, `-w_ji` scattered into column `i`
/// on the neighborhood support. Columns sum to zero because the weights
/// sum to one.
pub fn lle_factor_matrix(w: &LleWeights) -> FactorMatrix {
    let n = w.n();
    let mut columns = Vec::with_capacity(n);
    for i in 0..n {
        let col: Vec<(usize, f64)> = w.neighbors[i]
            .iter()
            .zip(&w.weights[i])
            .map(|(&j, &wj)| (j, -w.precisions[i] * wj))
            .collect();
        columns.push(col);
    }
    let mut m = FactorMatrix::from_columns(n, columns).expect("valid support by construction");
    m.set_diagonal((0..n).map(|i| w.precisions[i]).collect());
    m
}

/// Embedding stage: eigenvectors of `M M^T` for the `q` smallest
/// eigenvalues after the constant one, kept at unit norm.
pub fn lle_embed(w: &LleWeights, q: usize) -> Result<Embedding> {
    let n = w.n();
    if q == 0 || q + 1 >= n {
        return Err(Error::QOutOfRange { q, n });
    }
    let m = lle_factor_matrix(w);
    let l = m.gram();
    let pairs = sym_eig(&l)?;
    let mut coords = DMatrix::zeros(n, q);
    let mut eigenvalues = Vec::with_capacity(q);
    for c in 0..q {
        coords.set_column(c, &pairs.vectors.column(c + 1));
        eigenvalues.push(pairs.values[c + 1]);
    }
    let discarded: f64 = pairs.values[(q + 1)..].iter().filter(|&&v| v > 0.0).sum();
    let negative: f64 = pairs.values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    Ok(Embedding {
        coords,
        eigenvalues,
        method: MethodTag::Lle,
        diagnostics: EmbeddingDiagnostics {
            discarded_positive_mass: discarded,
            negative_mass: negative,
        },
    })
}

/// Pseudolikelihood of the field with factored precision `M M^T`: the sum
/// of per-point conditional Gaussian log densities, each with precision
/// `m_ii^2` and mean given by the scaled off-diagonal column entries.
/// Exact for lower-triangular factors, an approximation otherwise.
pub fn pseudo_log_likelihood(y: &DMatrix<f64>, m: &FactorMatrix) -> Result<f64> {
    let n = y.nrows();
    if m.n() != n {
        return Err(Error::DimensionMismatch {
            context: format!("factor is {}x{} for {n} points", m.n(), m.n()),
        });
    }
    let p = y.ncols();
    let dense = m.to_dense();
    let tau = std::f64::consts::TAU;
    let mut total = 0.0;
    for i in 0..n {
        let mii = dense[(i, i)];
        if mii == 0.0 {
            return Err(Error::invalid(
                "factor",
                format!("m[{i},{i}] = 0 leaves the conditional density undefined"),
            ));
        }
        // ||Y^T m_col_i||^2 equals m_ii^2 times the reconstruction error.
        let col = dense.column(i);
        let mut quad = 0.0;
        for f in 0..p {
            let mut dot = 0.0;
            for r in 0..n {
                dot += y[(r, f)] * col[r];
            }
            quad += dot * dot;
        }
        total += 0.5 * p as f64 * ((mii * mii).ln() - tau.ln()) - 0.5 * quad;
    }
    Ok(total)
}

impl FactorMatrix {
    pub(crate) fn set_diagonal(&mut self, diag: Vec<f64>) {
        debug_assert_eq!(diag.len(), self.n());
        self.replace_diagonal(diag);
    }
}
