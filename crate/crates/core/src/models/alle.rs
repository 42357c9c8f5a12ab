//! Acyclic locally linear embedding.
//!
//! Ordering the points and restricting neighbors to later indices makes
//! the precision factor lower triangular, so the likelihood factorizes
//! into independent per-point regressions and the pseudolikelihood
//! becomes the exact model likelihood. Each regression also estimates
//! its own precision from the reconstruction residual.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{acyclic_graph, permute_rows, unpermute_rows, FactorMatrix, GraphKind, NeighborGraph};
use crate::models::lle::local_regression;
use crate::models::meu::GrfModel;
use crate::models::FitWarning;
use crate::spectral::{Embedding, EmbeddingDiagnostics, MethodTag};

#[derive(Debug, Clone)]
pub struct AlleConfig {
    /// Diagonal entry for the last point, whose regression is empty; kept
    /// small so it barely perturbs the field while making `M` invertible.
    pub eps_last: f64,
    /// Ridge for the per-point regressions, as in [`crate::models::lle_weights`].
    pub ridge: f64,
    /// Use the raw squared residual as the inverse precision instead of
    /// the per-feature residual variance (residual^2 / p). The default
    /// divides by the feature count, which is the stationary point of the
    /// per-point likelihood over the precision.
    pub per_point_residual: bool,
}

impl Default for AlleConfig {
    fn default() -> Self {
        Self {
            eps_last: 1e-3,
            ridge: 1e-6,
            per_point_residual: false,
        }
    }
}

/// A fitted acyclic field: the triangular factor plus the usual model
/// wrapper (the covariance is left unset; embedding goes through the
/// factor, see [`alle_embed`]).
#[derive(Debug, Clone)]
pub struct AlleFit {
    pub factor: FactorMatrix,
    pub model: GrfModel,
}

/// Fits the acyclic field: one sum-to-one regression per point on its
/// parents, with the regression precision read off the residual. The log
/// likelihood is exact because the triangular determinant splits into the
/// per-point precisions.
pub fn alle_fit(y: &DMatrix<f64>, g: &NeighborGraph, cfg: &AlleConfig) -> Result<AlleFit> {
    if g.kind() != GraphKind::Acyclic {
        return Err(Error::WrongGraphKind { expected: "acyclic" });
    }
    let n = y.nrows();
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            context: format!("data has {n} rows but graph has {} points", g.n()),
        });
    }
    if !(cfg.eps_last > 0.0) {
        return Err(Error::invalid("eps_last", "must be positive"));
    }
    let p = y.ncols();
    let pf = p as f64;
    let tau = std::f64::consts::TAU;

    let mut columns: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    let mut warnings = Vec::new();
    let mut log_likelihood = 0.0;
    for i in 0..n {
        let parents = g.neighbors(i);
        if parents.is_empty() {
            if i + 1 != n {
                return Err(Error::EmptyNeighborhood { point: i });
            }
            columns.push(Vec::new());
            diag.push(cfg.eps_last);
            let quad: f64 = (0..p).map(|f| (cfg.eps_last * y[(i, f)]).powi(2)).sum();
            log_likelihood +=
                0.5 * pf * ((cfg.eps_last * cfg.eps_last).ln() - tau.ln()) - 0.5 * quad;
            continue;
        }
        let (weights, mut residual) = local_regression(y, i, parents, cfg.ridge)?;
        if residual < 1e-24 {
            residual = 1e-24;
            warnings.push(FitWarning::ResidualFloored { point: i });
        }
        let m_ii = if cfg.per_point_residual {
            1.0 / residual.sqrt()
        } else {
            (pf / residual).sqrt()
        };
        columns.push(
            parents
                .iter()
                .zip(&weights)
                .map(|(&j, &w)| (j, -m_ii * w))
                .collect(),
        );
        diag.push(m_ii);
        log_likelihood += 0.5 * pf * ((m_ii * m_ii).ln() - tau.ln())
            - 0.5 * m_ii * m_ii * residual;
    }

    let factor = FactorMatrix::lower_triangular_with_diag(n, columns, diag)?;
    let precision = factor.gram();
    let model = GrfModel {
        precision,
        covariance: None,
        gamma: 0.0,
        p,
        log_likelihood,
        edges: Vec::new(),
        multipliers: Vec::new(),
        constraint: Default::default(),
        converged: true,
        iterations: n,
        warnings,
    };
    Ok(AlleFit { factor, model })
}

/// Embedding through the factor: the centered covariance is
/// `(M^{-1} H)^T (M^{-1} H)`, so its top eigenpairs are the squared
/// leading singular values and right singular vectors of `A = M^{-1} H`.
/// Going through the triangular solve keeps the extraction accurate even
/// when some regression precisions are enormous (near-interpolating
/// points), where inverting `M M^T` outright would lose the small
/// eigenvalues.
pub fn alle_embed(fit: &AlleFit, q: usize) -> Result<Embedding> {
    let n = fit.factor.n();
    if q == 0 || q > n.saturating_sub(1) {
        return Err(Error::QOutOfRange { q, n });
    }
    let m = fit.factor.to_dense();
    let nf = n as f64;
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0 - 1.0 / nf
        } else {
            -1.0 / nf
        }
    });
    let a = m
        .solve_lower_triangular(&h)
        .ok_or(Error::NotPositiveDefinite {
            context: "triangular factor is singular",
        })?;
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().ok_or(Error::EigenFailure {
        context: "svd did not return right singular vectors",
    })?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let mut coords = DMatrix::zeros(n, q);
    let mut eigenvalues = Vec::with_capacity(q);
    for c in 0..q {
        let sigma = svd.singular_values[order[c]];
        eigenvalues.push(sigma * sigma);
        let mut col = v_t.row(order[c]).transpose() * sigma;
        crate::spectral::fix_sign(&mut col);
        coords.set_column(c, &col);
    }
    let discarded: f64 = order[q..]
        .iter()
        .map(|&i| svd.singular_values[i].powi(2))
        .sum();
    Ok(Embedding {
        coords,
        eigenvalues,
        method: MethodTag::Alle,
        diagnostics: EmbeddingDiagnostics {
            discarded_positive_mass: discarded,
            negative_mass: 0.0,
        },
    })
}

/// Full pipeline under a point ordering: permute, build the acyclic
/// graph, fit, embed, and map the coordinates back to the original row
/// order.
pub fn alle_pipeline(
    y: &DMatrix<f64>,
    k: usize,
    ordering: &[usize],
    cfg: &AlleConfig,
    q: usize,
) -> Result<(AlleFit, Embedding)> {
    let g = acyclic_graph(y, k, ordering)?;
    let yp = permute_rows(y, ordering);
    let fit = alle_fit(&yp, &g, cfg)?;
    let emb = alle_embed(&fit, q)?;
    let coords = unpermute_rows(&emb.coords, ordering);
    Ok((
        fit,
        Embedding {
            coords,
            eigenvalues: emb.eigenvalues,
            method: emb.method,
            diagnostics: emb.diagnostics,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::acyclic_graph;
    use crate::models::lle::pseudo_log_likelihood;
    use crate::models::log_likelihood_dense;
    use crate::spectral::{center, cmds_embed, squared_distances};

    fn wave_data(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |i, j| {
            ((i as f64 + 1.3) * (j as f64 + 0.7) * 0.619 + seed as f64).sin()
        })
    }

    #[test]
    fn two_point_regression_weight_is_one() {
        let y = DMatrix::from_row_slice(2, 1, &[0.0, 2.0]);
        let g = acyclic_graph(&y, 1, &[0, 1]).unwrap();
        let fit = alle_fit(&y, &g, &AlleConfig::default()).unwrap();
        let m = fit.factor.to_dense();
        // Column 0: weight 1 on the single parent, scaled by the precision.
        assert!((m[(1, 0)] + m[(0, 0)]).abs() < 1e-12);
        assert!(m[(0, 0)] > 0.0);
    }

    #[test]
    fn exact_likelihood_matches_dense_density() {
        // A moderate eps_last keeps the dense comparison well conditioned;
        // the identity itself holds for any value.
        let cfg = AlleConfig {
            eps_last: 0.1,
            ..Default::default()
        };
        let y = wave_data(9, 3, 4);
        let g = acyclic_graph(&y, 3, &(0..9).collect::<Vec<_>>()).unwrap();
        let fit = alle_fit(&y, &g, &cfg).unwrap();
        let dense = log_likelihood_dense(&y, &fit.factor.gram()).unwrap();
        assert!((fit.model.log_likelihood - dense).abs() < 1e-8);
        let pseudo = pseudo_log_likelihood(&y, &fit.factor).unwrap();
        assert!((pseudo - dense).abs() < 1e-8);
    }

    #[test]
    fn duplicate_point_floors_residual_with_warning() {
        let mut y = wave_data(6, 2, 9);
        // Make point 2 the exact copy of its only parent 3.
        for f in 0..2 {
            y[(2, f)] = y[(3, f)];
        }
        let neighbors = vec![vec![1], vec![2], vec![3], vec![4], vec![5], vec![]];
        let g = crate::graph::NeighborGraph::from_neighbor_sets(GraphKind::Acyclic, neighbors)
            .unwrap();
        let fit = alle_fit(&y, &g, &AlleConfig::default()).unwrap();
        assert!(fit
            .model
            .warnings
            .iter()
            .any(|w| matches!(w, FitWarning::ResidualFloored { point: 2 })));
    }

    #[test]
    fn embed_matches_covariance_cmds_on_benign_factor() {
        let y = wave_data(10, 4, 2);
        let g = acyclic_graph(&y, 2, &(0..10).collect::<Vec<_>>()).unwrap();
        let fit = alle_fit(&y, &g, &AlleConfig::default()).unwrap();
        let emb = alle_embed(&fit, 2).unwrap();

        let k = fit
            .factor
            .gram()
            .try_inverse()
            .expect("benign factor is invertible");
        let reference = cmds_embed(&center(&k), 2).unwrap();
        assert!((&emb.coords - &reference.coords).amax() < 1e-6);
    }

    #[test]
    fn pipeline_unpermutes_coordinates() {
        let y = wave_data(8, 3, 11);
        let identity: Vec<usize> = (0..8).collect();
        let (_, emb_id) = alle_pipeline(&y, 2, &identity, &AlleConfig::default(), 2).unwrap();

        // A permuted run must produce the same geometry on the same rows.
        let ordering: Vec<usize> = vec![3, 1, 7, 0, 5, 2, 6, 4];
        let (_, emb_perm) = alle_pipeline(&y, 2, &ordering, &AlleConfig::default(), 2).unwrap();
        assert_eq!(emb_perm.coords.nrows(), 8);
        // Different orderings give different fields, so compare only the
        // row bookkeeping: distances between identical points vanish.
        let d_id = squared_distances(&emb_id.coords);
        let d_perm = squared_distances(&emb_perm.coords);
        assert_eq!(d_id.nrows(), d_perm.nrows());
    }

    #[test]
    fn rejects_undirected_graph() {
        let y = wave_data(5, 2, 3);
        let g = crate::graph::knn_graph(&y, 2).unwrap();
        assert!(matches!(
            alle_fit(&y, &g, &AlleConfig::default()),
            Err(Error::WrongGraphKind { .. })
        ));
    }
}
