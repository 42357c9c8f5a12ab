//! Laplacian eigenmaps: embed through the bottom of the spectrum of the
//! graph Laplacian, either as the generalized problem `L u = lambda D u`
//! (the degree-constrained original) or the unnormalized `L u = lambda u`
//! variant.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{degree_matrix, heat_adjacency, laplacian_from_adjacency, unit_adjacency, NeighborGraph};
use crate::spectral::{
    gen_eig, sym_eig, sym_eig_partial, Embedding, EmbeddingDiagnostics, MethodTag, SpectrumEnd,
    DENSE_EIGEN_LIMIT,
};

#[derive(Debug, Clone)]
pub struct EigenmapsOpts {
    /// Weight edges by the heat kernel instead of unit weights.
    pub weighted: bool,
    /// Heat-kernel bandwidth; required when `weighted` is set.
    pub sigma: Option<f64>,
    /// Solve `L u = lambda D u` (true) or `L u = lambda u` (false).
    pub normalized: bool,
}

impl Default for EigenmapsOpts {
    fn default() -> Self {
        Self {
            weighted: false,
            sigma: None,
            normalized: true,
        }
    }
}

pub fn laplacian_eigenmaps(
    y: &DMatrix<f64>,
    g: &NeighborGraph,
    q: usize,
    opts: &EigenmapsOpts,
) -> Result<Embedding> {
    g.require_undirected()?;
    g.require_connected()?;
    let n = g.n();
    if q == 0 || q + 1 >= n {
        return Err(Error::QOutOfRange { q, n });
    }
    let adjacency = if opts.weighted {
        let sigma = opts.sigma.ok_or(Error::InvalidParameter {
            name: "sigma",
            reason: "required for heat-kernel weights".into(),
        })?;
        heat_adjacency(y, g, sigma)?
    } else {
        unit_adjacency(g)?
    };
    let laplacian = laplacian_from_adjacency(&adjacency);
    let degrees = degree_matrix(&adjacency);

    // Smallest q+1 pairs; the first is the constant null vector and is
    // discarded.
    let (values, vectors) = if n <= DENSE_EIGEN_LIMIT {
        let l = laplacian.to_dense();
        let pairs = if opts.normalized {
            gen_eig(&l, &degrees)?
        } else {
            sym_eig(&l)?
        };
        (pairs.values, pairs.vectors)
    } else {
        // Sparse path: work on the (normalized) operator through matvecs.
        let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / d.sqrt()).collect();
        let lap = &laplacian;
        let apply: Box<dyn Fn(&DVector<f64>) -> DVector<f64>> = if opts.normalized {
            let inv = inv_sqrt.clone();
            Box::new(move |v: &DVector<f64>| {
                let scaled = DVector::from_fn(n, |i, _| v[i] * inv[i]);
                let mut out = lap.matvec(&scaled);
                for i in 0..n {
                    out[i] *= inv[i];
                }
                out
            })
        } else {
            Box::new(move |v: &DVector<f64>| lap.matvec(v))
        };
        let pairs = sym_eig_partial(&apply, n, q + 1, SpectrumEnd::Smallest)?;
        let mut vectors = pairs.vectors;
        if opts.normalized {
            for i in 0..n {
                for c in 0..vectors.ncols() {
                    vectors[(i, c)] *= inv_sqrt[i];
                }
            }
        }
        (pairs.values, vectors)
    };

    let mut coords = DMatrix::zeros(n, q);
    let mut eigenvalues = Vec::with_capacity(q);
    for c in 0..q {
        coords.set_column(c, &vectors.column(c + 1));
        eigenvalues.push(values[c + 1]);
    }
    let discarded: f64 = values
        .iter()
        .skip(q + 1)
        .filter(|&&v| v > 0.0)
        .sum();
    Ok(Embedding {
        coords,
        eigenvalues,
        method: MethodTag::LaplacianEigenmaps {
            normalized: opts.normalized,
        },
        diagnostics: EmbeddingDiagnostics {
            discarded_positive_mass: discarded,
            negative_mass: values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum(),
        },
    })
}
