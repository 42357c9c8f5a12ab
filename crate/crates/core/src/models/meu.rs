//! Maximum entropy unfolding: maximum likelihood over the edge
//! multipliers of a Gaussian random field whose precision is the graph
//! Laplacian plus a small spherical term.
//!
//! The multipliers are kept nonnegative (an attractive network), which
//! guarantees a valid covariance; the resulting inequality-constrained
//! problem is solved by projected gradient ascent with Barzilai-Borwein
//! steps and a backtracking line search on the exact log likelihood.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{laplacian_from_multipliers, Laplacian, NeighborGraph};
use crate::models::{log_likelihood_dense, FitWarning};
use crate::spectral::{center, cmds_embed_tagged, squared_distances, Embedding, MethodTag};

/// Sign handling for the edge multipliers.
///
/// The nonnegative mode is the attractive network: it guarantees a
/// positive semidefinite Laplacian, at the price of turning the distance
/// constraints into inequalities (edges whose expected distance already
/// undershoots the observation clamp to zero). The unconstrained mode
/// maximizes the same likelihood over sign-free multipliers, staying
/// positive definite by rejecting steps that leave the cone; it is the
/// variant whose complete-graph limit reproduces principal coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiplierConstraint {
    #[default]
    Nonnegative,
    Unconstrained,
}

#[derive(Debug, Clone)]
pub struct MeuFitConfig {
    pub constraint: MultiplierConstraint,
    pub max_iters: usize,
    /// Stationarity tolerance, relative to the mean observed squared edge
    /// distance: on active edges the expected and observed squared
    /// distances must agree to this precision, on inactive edges the
    /// expectation must not exceed the observation by more than it.
    pub kkt_tol: f64,
    /// Base-density precision added to the Laplacian diagonal.
    pub gamma: f64,
    /// Initial multiplier value; defaults to the reciprocal mean squared
    /// edge distance so the field starts on the data's scale.
    pub lambda_init: Option<f64>,
    pub armijo_c: f64,
    pub max_backtracks: usize,
    /// Edge-count threshold above which the fit falls back from the full
    /// damped-Newton system to diagonally scaled gradient ascent.
    pub newton_edge_limit: usize,
}

impl Default for MeuFitConfig {
    fn default() -> Self {
        Self {
            constraint: MultiplierConstraint::Nonnegative,
            max_iters: 4000,
            kkt_tol: 1e-4,
            gamma: 1e-4,
            lambda_init: None,
            armijo_c: 1e-4,
            max_backtracks: 60,
            newton_edge_limit: 2500,
        }
    }
}

/// A fitted Gaussian random field over the data points.
#[derive(Debug, Clone)]
pub struct GrfModel {
    /// Dense precision matrix (Laplacian plus `gamma I` for MEU).
    pub precision: DMatrix<f64>,
    /// Its inverse; absent when the fit is too ill-conditioned to invert
    /// meaningfully (the acyclic variant embeds through its factor
    /// instead).
    pub covariance: Option<DMatrix<f64>>,
    pub gamma: f64,
    /// Feature count of the data the field was fitted to.
    pub p: usize,
    pub log_likelihood: f64,
    /// Edge structure and fitted multipliers, present for MEU fits.
    pub edges: Vec<(usize, usize)>,
    pub multipliers: Vec<f64>,
    /// Sign handling the fit used.
    pub constraint: MultiplierConstraint,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

impl GrfModel {
    pub fn n(&self) -> usize {
        self.precision.nrows()
    }
}

/// Log likelihood of the field with precision `L + gamma I`.
pub fn meu_log_likelihood(y: &DMatrix<f64>, l: &Laplacian, gamma: f64) -> Result<f64> {
    let mut precision = l.to_dense();
    for i in 0..precision.nrows() {
        precision[(i, i)] += gamma;
    }
    log_likelihood_dense(y, &precision)
}

/// Analytic likelihood gradient with respect to each edge multiplier,
/// aligned with `g.edges()`: half the gap between the expected and the
/// observed squared distance across the edge.
pub fn meu_gradient(
    y: &DMatrix<f64>,
    g: &NeighborGraph,
    lambdas: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let l = laplacian_from_multipliers(g, lambdas)?;
    let d = squared_distances(y);
    let state = FitState::evaluate(y, &l, gamma, y.ncols()).ok_or(Error::NotPositiveDefinite {
        context: "gradient evaluation",
    })?;
    Ok(gradient_from_covariance(
        &state.covariance,
        g.edges(),
        &d,
        y.ncols(),
    ))
}

fn gradient_from_covariance(
    k: &DMatrix<f64>,
    edges: &[(usize, usize)],
    d: &DMatrix<f64>,
    p: usize,
) -> Vec<f64> {
    let pf = p as f64;
    edges
        .iter()
        .map(|&(i, j)| {
            let expected = pf * (k[(i, i)] - 2.0 * k[(i, j)] + k[(j, j)]);
            0.5 * (expected - d[(i, j)])
        })
        .collect()
}

/// Negated likelihood Hessian in the multipliers. The trace term is
/// linear in the multipliers, so only the log-determinant curves:
/// `-(p/2) (u_e^T K u_f)^2` for edges `e`, `f` with `u` the edge
/// difference vectors. Returned negated, i.e. positive semidefinite.
fn negated_hessian(k: &DMatrix<f64>, edges: &[(usize, usize)], p: usize) -> DMatrix<f64> {
    let m = edges.len();
    let pf = p as f64;
    let mut h = DMatrix::zeros(m, m);
    for (a, &(i, j)) in edges.iter().enumerate() {
        for (b, &(s, t)) in edges.iter().enumerate().skip(a) {
            let w = k[(i, s)] - k[(i, t)] - k[(j, s)] + k[(j, t)];
            let v = 0.5 * pf * w * w;
            h[(a, b)] = v;
            h[(b, a)] = v;
        }
    }
    h
}

/// Negated Hessian diagonal only, for the large-graph fallback where the
/// full Newton system is too big: `expected^2 / (2p)` per edge.
fn negated_hessian_diagonal(
    k: &DMatrix<f64>,
    edges: &[(usize, usize)],
    p: usize,
) -> Vec<f64> {
    let pf = p as f64;
    edges
        .iter()
        .map(|&(i, j)| {
            let transform = k[(i, i)] - 2.0 * k[(i, j)] + k[(j, j)];
            (0.5 * pf * transform * transform).max(1e-300)
        })
        .collect()
}

/// Ascent direction from the damped Newton system restricted to the free
/// set (multipliers off their bound or pushing away from it).
fn newton_direction(
    bmat: &DMatrix<f64>,
    grad: &DVector<f64>,
    free: &[usize],
) -> Option<DVector<f64>> {
    let mf = free.len();
    if mf == 0 {
        return None;
    }
    let mut b_ff = DMatrix::zeros(mf, mf);
    for (a, &ea) in free.iter().enumerate() {
        for (b, &eb) in free.iter().enumerate() {
            b_ff[(a, b)] = bmat[(ea, eb)];
        }
    }
    let g_f = DVector::from_fn(mf, |a, _| grad[free[a]]);
    let scale = b_ff.diagonal().mean().max(1e-300);
    let mut nu = 1e-12 * scale;
    for _ in 0..30 {
        let mut damped = b_ff.clone();
        for a in 0..mf {
            damped[(a, a)] += nu;
        }
        if let Some(chol) = damped.cholesky() {
            let step_f = chol.solve(&g_f);
            if step_f.iter().all(|v| v.is_finite()) {
                let mut dir = DVector::zeros(grad.len());
                for (a, &ea) in free.iter().enumerate() {
                    dir[ea] = step_f[a];
                }
                return Some(dir);
            }
        }
        nu *= 100.0;
    }
    None
}

struct FitState {
    log_likelihood: f64,
    covariance: DMatrix<f64>,
}

impl FitState {
    fn evaluate(y: &DMatrix<f64>, l: &Laplacian, gamma: f64, p: usize) -> Option<Self> {
        let n = l.n();
        let mut precision = l.to_dense();
        for i in 0..n {
            precision[(i, i)] += gamma;
        }
        let chol = precision.clone().cholesky()?;
        let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mut quad = 0.0;
        for j in 0..p {
            let col = y.column(j).clone_owned();
            quad += (&precision * &col).dot(&col);
        }
        let tau = std::f64::consts::TAU;
        let log_likelihood =
            0.5 * p as f64 * log_det - 0.5 * (n * p) as f64 * tau.ln() - 0.5 * quad;
        Some(Self {
            log_likelihood,
            covariance: chol.inverse(),
        })
    }
}

/// Largest violation of the fit's optimality conditions, relative to the
/// mean squared edge distance: active edges must match expected and
/// observed squared distances, inactive edges must not want to grow.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub max_active_gap: f64,
    pub max_inactive_violation: f64,
    pub mean_edge_distance: f64,
}

impl KktReport {
    pub fn residual(&self) -> f64 {
        self.max_active_gap.max(self.max_inactive_violation)
    }

    fn compute(
        k: &DMatrix<f64>,
        edges: &[(usize, usize)],
        lambdas: &[f64],
        d: &DMatrix<f64>,
        p: usize,
        constraint: MultiplierConstraint,
    ) -> Self {
        let pf = p as f64;
        let mut max_active = 0.0f64;
        let mut max_inactive = 0.0f64;
        let mut total = 0.0;
        for (&(i, j), &lam) in edges.iter().zip(lambdas) {
            let expected = pf * (k[(i, i)] - 2.0 * k[(i, j)] + k[(j, j)]);
            let observed = d[(i, j)];
            total += observed;
            let active = constraint == MultiplierConstraint::Unconstrained || lam > 0.0;
            if active {
                max_active = max_active.max((expected - observed).abs());
            } else {
                max_inactive = max_inactive.max(expected - observed);
            }
        }
        let mean = if edges.is_empty() {
            0.0
        } else {
            total / edges.len() as f64
        };
        Self {
            max_active_gap: max_active,
            max_inactive_violation: max_inactive.max(0.0),
            mean_edge_distance: mean,
        }
    }
}

/// Optimality report of a fitted model against the data it was fitted to.
pub fn meu_kkt_report(model: &GrfModel, y: &DMatrix<f64>) -> Result<KktReport> {
    let k = model
        .covariance
        .as_ref()
        .ok_or(Error::NotPositiveDefinite {
            context: "model carries no covariance",
        })?;
    let d = squared_distances(y);
    Ok(KktReport::compute(
        k,
        &model.edges,
        &model.multipliers,
        &d,
        model.p,
        model.constraint,
    ))
}

/// Fits the edge multipliers by projected gradient ascent on the exact
/// log likelihood under the nonnegativity constraint.
pub fn meu_fit(y: &DMatrix<f64>, g: &NeighborGraph, cfg: &MeuFitConfig) -> Result<GrfModel> {
    g.require_undirected()?;
    let n = y.nrows();
    if n < 3 {
        return Err(Error::TooFewPoints { n, min: 3 });
    }
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            context: format!("data has {n} rows but graph has {} points", g.n()),
        });
    }
    let p = y.ncols();
    if p < 1 {
        return Err(Error::DimensionMismatch {
            context: "data must have at least one feature".into(),
        });
    }
    g.require_connected()?;

    let mut warnings = Vec::new();
    let mut gamma = cfg.gamma;
    if !(gamma > 0.0) {
        gamma = 1e-8;
        warnings.push(FitWarning::GammaFloored { gamma });
    }

    let edges = g.edges().to_vec();
    let d = squared_distances(y);
    let mean_d = edges.iter().map(|&(i, j)| d[(i, j)]).sum::<f64>() / edges.len() as f64;
    let lambda0 = cfg
        .lambda_init
        .unwrap_or(if mean_d > 0.0 { 1.0 / mean_d } else { 1.0 });
    if !(lambda0 > 0.0) {
        return Err(Error::invalid("lambda_init", "must be positive"));
    }
    // Stationarity threshold in gradient units: the gradient is half the
    // distance gap, so compare against half the relative tolerance. Fully
    // degenerate data (all distances zero) can never satisfy the
    // constraints, so the threshold collapses to zero and the fit runs to
    // its iteration cap.
    let grad_tol = 0.5 * cfg.kkt_tol * mean_d;

    let mut lambda = DVector::from_element(edges.len(), lambda0);
    let eval = |lam: &DVector<f64>, gamma: f64| -> Option<FitState> {
        let l = Laplacian::from_edge_values(n, &edges, lam.as_slice());
        FitState::evaluate(y, &l, gamma, p)
    };

    let mut state = match eval(&lambda, gamma) {
        Some(s) => s,
        None => {
            // Nonnegative multipliers keep the Laplacian positive
            // semidefinite, so a failure here means gamma is too small.
            gamma = gamma.max(1e-8);
            warnings.push(FitWarning::GammaFloored { gamma });
            eval(&lambda, gamma).ok_or(Error::NotPositiveDefinite {
                context: "initial point of the MEU fit",
            })?
        }
    };
    let mut grad =
        DVector::from_vec(gradient_from_covariance(&state.covariance, &edges, &d, p));

    let constraint = cfg.constraint;
    let use_full_newton = edges.len() <= cfg.newton_edge_limit;

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..cfg.max_iters {
        iterations = iter + 1;
        let pg = projected_gradient_norm(&lambda, &grad, constraint);
        if pg <= grad_tol {
            converged = true;
            break;
        }

        // Free set: everything in the unconstrained mode; in the
        // attractive mode, multipliers off the bound or pulled inward.
        let free: Vec<usize> = (0..edges.len())
            .filter(|&e| match constraint {
                MultiplierConstraint::Unconstrained => true,
                MultiplierConstraint::Nonnegative => lambda[e] > 0.0 || grad[e] > 0.0,
            })
            .collect();

        let direction_full = if use_full_newton {
            let bmat = negated_hessian(&state.covariance, &edges, p);
            match newton_direction(&bmat, &grad, &free) {
                Some(dir) => dir,
                None => break,
            }
        } else {
            // Per-edge Newton scaling for graphs too large for the full
            // system; the Armijo search keeps it safe.
            let diag = negated_hessian_diagonal(&state.covariance, &edges, p);
            let mut dir = DVector::zeros(edges.len());
            for &e in &free {
                dir[e] = grad[e] / diag[e];
            }
            dir
        };

        let mut accepted = false;
        let mut trial_step = 1.0f64;
        for _ in 0..cfg.max_backtracks {
            let candidate = lambda.map_with_location(|i, _, v| {
                let moved = v + trial_step * direction_full[i];
                match constraint {
                    MultiplierConstraint::Nonnegative => moved.max(0.0),
                    MultiplierConstraint::Unconstrained => moved,
                }
            });
            let direction = &candidate - &lambda;
            if direction.amax() == 0.0 {
                break;
            }
            if let Some(next) = eval(&candidate, gamma) {
                let sufficient =
                    state.log_likelihood + cfg.armijo_c * grad.dot(&direction);
                if next.log_likelihood >= sufficient {
                    lambda = candidate;
                    state = next;
                    grad = DVector::from_vec(gradient_from_covariance(
                        &state.covariance,
                        &edges,
                        &d,
                        p,
                    ));
                    accepted = true;
                    break;
                }
            }
            trial_step *= 0.5;
        }
        if !accepted {
            // The line search stalled at numerical precision.
            break;
        }
    }

    if !converged {
        let kkt = KktReport::compute(
            &state.covariance,
            &edges,
            lambda.as_slice(),
            &d,
            p,
            constraint,
        );
        warnings.push(FitWarning::IterationLimit {
            kkt_residual: kkt.residual(),
        });
    }

    let l = Laplacian::from_edge_values(n, &edges, lambda.as_slice());
    let mut precision = l.to_dense();
    for i in 0..n {
        precision[(i, i)] += gamma;
    }
    Ok(GrfModel {
        precision,
        covariance: Some(state.covariance),
        gamma,
        p,
        log_likelihood: state.log_likelihood,
        edges,
        multipliers: lambda.as_slice().to_vec(),
        constraint,
        converged,
        iterations,
        warnings,
    })
}

fn projected_gradient_norm(
    lambda: &DVector<f64>,
    grad: &DVector<f64>,
    constraint: MultiplierConstraint,
) -> f64 {
    let mut max = 0.0f64;
    for i in 0..lambda.len() {
        let g = match constraint {
            MultiplierConstraint::Unconstrained => grad[i].abs(),
            MultiplierConstraint::Nonnegative => {
                if lambda[i] > 0.0 {
                    grad[i].abs()
                } else {
                    grad[i].max(0.0)
                }
            }
        };
        max = max.max(g);
    }
    max
}

/// Embeds a fitted field: center its covariance and run classical
/// multidimensional scaling.
pub fn meu_embed(model: &GrfModel, q: usize) -> Result<Embedding> {
    embed_covariance(model, q, MethodTag::Meu)
}

pub(crate) fn embed_covariance(model: &GrfModel, q: usize, tag: MethodTag) -> Result<Embedding> {
    let k = model
        .covariance
        .as_ref()
        .ok_or(Error::NotPositiveDefinite {
            context: "model carries no covariance to embed",
        })?;
    let b = center(k);
    cmds_embed_tagged(&b, q, tag)
}

impl Laplacian {
    /// Assembles a Laplacian directly from an edge list and values,
    /// bypassing graph validation (the caller owns the invariant).
    pub(crate) fn from_edge_values(n: usize, edges: &[(usize, usize)], values: &[f64]) -> Self {
        debug_assert_eq!(edges.len(), values.len());
        let mut diag = vec![0.0; n];
        for (&(i, j), &l) in edges.iter().zip(values) {
            diag[i] += l;
            diag[j] += l;
        }
        Self::from_raw_parts(n, edges.to_vec(), values.to_vec(), diag)
    }
}
