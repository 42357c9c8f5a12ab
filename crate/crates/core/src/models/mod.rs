//! The embedding algorithms: maximum entropy unfolding, locally linear
//! embedding and its acyclic variant, Laplacian eigenmaps, isomap and the
//! graphical-lasso structure learner.

mod alle;
mod drill;
mod eigenmaps;
mod isomap;
mod lle;
mod meu;

pub use alle::{alle_embed, alle_fit, alle_pipeline, AlleConfig, AlleFit};
pub use drill::{drill_embed, drill_fit, graphical_lasso, DrillConfig, GlassoReport};
pub use eigenmaps::{laplacian_eigenmaps, EigenmapsOpts};
pub use isomap::{geodesic_distances, isomap, IsomapResult};
pub use lle::{lle_embed, lle_factor_matrix, lle_weights, pseudo_log_likelihood, LleWeights};
pub use meu::{
    meu_embed, meu_fit, meu_gradient, meu_kkt_report, meu_log_likelihood, GrfModel, KktReport,
    MeuFitConfig, MultiplierConstraint,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Warnings a fit can accumulate without failing outright.
#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    /// Iteration cap reached before the stopping rule was satisfied.
    IterationLimit { kkt_residual: f64 },
    /// The base-density precision had to be raised to keep the system
    /// positive definite.
    GammaFloored { gamma: f64 },
    /// A regression residual vanished (duplicate point) and was floored.
    ResidualFloored { point: usize },
    /// The graph was disconnected; only the largest component was kept.
    ComponentsDropped { kept: usize, total: usize },
    /// The latent coordinates had no variance; scoring fell back to a
    /// bias-plus-noise kernel.
    DegenerateLatent,
}

impl std::fmt::Display for FitWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitWarning::IterationLimit { kkt_residual } => write!(
                f,
                "iteration limit reached with stationarity residual {kkt_residual:.3e}"
            ),
            FitWarning::GammaFloored { gamma } => {
                write!(f, "base-density precision floored at {gamma:.3e}")
            }
            FitWarning::ResidualFloored { point } => {
                write!(f, "regression residual for point {point} floored")
            }
            FitWarning::ComponentsDropped { kept, total } => {
                write!(f, "graph disconnected; kept largest component ({kept} of {total} points)")
            }
            FitWarning::DegenerateLatent => {
                write!(f, "latent coordinates are degenerate; used bias+noise kernel")
            }
        }
    }
}

/// Log likelihood of the zero-mean Gaussian random field with the given
/// dense precision over the feature columns of `y`:
/// `(p/2) log det P - (n p / 2) log 2 pi - 1/2 tr(P Y Y^T)`.
pub(crate) fn log_likelihood_dense(y: &DMatrix<f64>, precision: &DMatrix<f64>) -> Result<f64> {
    let n = y.nrows();
    let p = y.ncols();
    if precision.nrows() != n || precision.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "precision is {}x{} for {n} points",
                precision.nrows(),
                precision.ncols()
            ),
        });
    }
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite {
            context: "log likelihood needs a positive definite precision",
        })?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mut quad = 0.0;
    for j in 0..p {
        let col = y.column(j).clone_owned();
        quad += (precision * &col).dot(&col);
    }
    let tau = std::f64::consts::TAU;
    Ok(0.5 * p as f64 * log_det - 0.5 * (n * p) as f64 * tau.ln() - 0.5 * quad)
}
