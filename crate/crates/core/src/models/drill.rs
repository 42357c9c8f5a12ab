//! Structure learning for the random field: L1-penalized maximum
//! likelihood on the precision over data points, solved by the graphical
//! lasso (block coordinate descent where each column update is a lasso
//! regression).
//!
//! The field likelihood weights the log determinant by `p/2` and the
//! trace by `1/2`; dividing through by `p/2` gives the canonical
//! graphical-lasso problem
//!
//! `min -log det T + tr((S/p) T) + (rho/p) sum_{i != j} |t_ij|`
//!
//! so the penalty `rho` stays comparable across feature counts. With
//! `rho = 0` the optimum is the unpenalized maximum likelihood
//! `T = p (Y Y^T)^{-1}`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::NeighborGraph;
use crate::models::meu::GrfModel;
use crate::models::log_likelihood_dense;
use crate::spectral::{Embedding, MethodTag};

#[derive(Debug, Clone)]
pub struct DrillConfig {
    /// L1 penalty on each off-diagonal multiplier pair (i < j) of the
    /// field objective.
    pub rho: f64,
    /// Base-density precision added to the scaled second-moment matrix's
    /// diagonal. Zero keeps the unpenalized optimum exact; raise it when
    /// the second moments are rank deficient and `rho = 0`.
    pub gamma: f64,
    pub max_sweeps: usize,
    /// Exit when the duality gap of the canonical problem drops below
    /// this.
    pub gap_tol: f64,
    /// Also exit when a full sweep changes the working covariance by less
    /// than this, relative to the mean diagonal.
    pub sweep_tol: f64,
    pub lasso_max_iter: usize,
    pub lasso_tol: f64,
}

impl Default for DrillConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            gamma: 0.0,
            max_sweeps: 400,
            gap_tol: 1e-6,
            sweep_tol: 1e-10,
            lasso_max_iter: 20_000,
            lasso_tol: 1e-12,
        }
    }
}

/// Diagnostic output of [`graphical_lasso`].
#[derive(Debug, Clone)]
pub struct GlassoReport {
    /// Estimated precision.
    pub theta: DMatrix<f64>,
    /// Final working covariance (the dual variable).
    pub w: DMatrix<f64>,
    pub sweeps: usize,
    /// Duality gap `tr(S T) - n + alpha ||T||_{1,off}` at exit.
    pub gap: f64,
    /// Dual objective `-log det W` after each sweep; block coordinate
    /// ascent makes this nonincreasing.
    pub dual_objective_trace: Vec<f64>,
}

/// Friedman-style graphical lasso on a covariance-scale matrix `s`:
/// minimize `-log det T + tr(s T) + alpha sum_{i != j} |t_ij|`.
///
/// `pattern[i]` restricts column `i`'s off-diagonal support when given:
/// entries outside the allowed set stay exactly zero (structure is then
/// only learned inside the pattern).
pub fn graphical_lasso(
    s: &DMatrix<f64>,
    alpha: f64,
    pattern: Option<&Vec<Vec<bool>>>,
    cfg: &DrillConfig,
) -> Result<GlassoReport> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: format!("second-moment matrix is {}x{}", s.nrows(), s.ncols()),
        });
    }
    if alpha < 0.0 {
        return Err(Error::invalid("rho", "penalty must be nonnegative"));
    }
    if let Some(p) = pattern {
        if p.len() != n || p.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                context: "pattern must be n x n".into(),
            });
        }
    }
    if s.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            context: "second-moment matrix (raise the diagonal floor)",
        });
    }

    // The diagonal moments are unpenalized, so the optimal working
    // covariance keeps w_ii = s_ii; only off-diagonal entries move.
    let mut w = s.clone();
    // Warm-started lasso coefficients, column j regressed on the rest.
    let mut beta = DMatrix::<f64>::zeros(n, n);
    let mean_diag = s.diagonal().mean().max(1e-300);

    let allowed = |i: usize, j: usize| -> bool {
        match pattern {
            Some(p) => p[i][j],
            None => true,
        }
    };

    let mut sweeps = 0;
    let mut dual_trace = Vec::new();
    let mut gap = f64::INFINITY;
    for sweep in 0..cfg.max_sweeps {
        sweeps = sweep + 1;
        let mut max_change = 0.0f64;
        for j in 0..n {
            // Gather the submatrix W11 and target s12 for column j.
            let others: Vec<usize> = (0..n).filter(|&i| i != j).collect();
            let m = others.len();
            let mut w11 = DMatrix::zeros(m, m);
            for (a, &ia) in others.iter().enumerate() {
                for (b, &ib) in others.iter().enumerate() {
                    w11[(a, b)] = w[(ia, ib)];
                }
            }
            let s12 = DVector::from_fn(m, |a, _| s[(others[a], j)]);
            let mut b = DVector::from_fn(m, |a, _| beta[(others[a], j)]);
            // u = W11 b, kept in sync across coordinate updates.
            let mut u = &w11 * &b;
            for _ in 0..cfg.lasso_max_iter {
                let mut delta_max = 0.0f64;
                for a in 0..m {
                    if !allowed(others[a], j) {
                        continue;
                    }
                    let old = b[a];
                    let grad_rest = u[a] - w11[(a, a)] * old;
                    let target = s12[a] - grad_rest;
                    let new = soft_threshold(target, alpha) / w11[(a, a)];
                    if new != old {
                        let d = new - old;
                        for r in 0..m {
                            u[r] += w11[(r, a)] * d;
                        }
                        b[a] = new;
                        delta_max = delta_max.max(d.abs());
                    }
                }
                if delta_max <= cfg.lasso_tol * (1.0 + b.amax()) {
                    break;
                }
            }
            // Write back the updated column of W.
            let w12 = &w11 * &b;
            for (a, &ia) in others.iter().enumerate() {
                let change = (w[(ia, j)] - w12[a]).abs();
                max_change = max_change.max(change);
                w[(ia, j)] = w12[a];
                w[(j, ia)] = w12[a];
                beta[(ia, j)] = b[a];
            }
        }

        let theta = recover_precision(&w, &beta);
        gap = duality_gap(s, &theta, alpha);
        let dual_obj = -log_det(&w)?;
        dual_trace.push(dual_obj);
        if gap.abs() <= cfg.gap_tol || max_change <= cfg.sweep_tol * mean_diag {
            let theta = recover_precision(&w, &beta);
            return Ok(GlassoReport {
                theta,
                w,
                sweeps,
                gap,
                dual_objective_trace: dual_trace,
            });
        }
    }
    if gap.abs() <= 1e3 * cfg.gap_tol {
        // Close enough to optimal to be usable; report what we have.
        let theta = recover_precision(&w, &beta);
        return Ok(GlassoReport {
            theta,
            w,
            sweeps,
            gap,
            dual_objective_trace: dual_trace,
        });
    }
    Err(Error::NonConvergence {
        what: "graphical lasso",
        iterations: sweeps,
    })
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

fn log_det(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        context: "working covariance in the graphical lasso",
    })?;
    Ok(2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Rebuilds the precision from the final working covariance and the
/// per-column lasso coefficients via the partitioned inverse:
/// `t_jj = 1 / (w_jj - w12' b)`, `t_12 = -t_jj b`.
fn recover_precision(w: &DMatrix<f64>, beta: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let mut theta = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut dot = 0.0;
        for i in 0..n {
            if i != j {
                dot += w[(i, j)] * beta[(i, j)];
            }
        }
        let t_jj = 1.0 / (w[(j, j)] - dot);
        theta[(j, j)] = t_jj;
        for i in 0..n {
            if i != j {
                theta[(i, j)] = -beta[(i, j)] * t_jj;
            }
        }
    }
    // Column updates leave tiny asymmetries; average them away.
    let theta_t = theta.transpose();
    (theta + theta_t) * 0.5
}

fn duality_gap(s: &DMatrix<f64>, theta: &DMatrix<f64>, alpha: f64) -> f64 {
    let n = s.nrows();
    let mut trace = 0.0;
    let mut l1_off = 0.0;
    for i in 0..n {
        for j in 0..n {
            trace += s[(i, j)] * theta[(j, i)];
            if i != j {
                l1_off += theta[(i, j)].abs();
            }
        }
    }
    trace - n as f64 + alpha * l1_off
}

/// Fits the field precision by L1-penalized maximum likelihood. An
/// optional neighborhood `pattern` freezes off-pattern entries at zero,
/// so the lasso only selects edges inside a prescribed candidate set.
pub fn drill_fit(
    y: &DMatrix<f64>,
    cfg: &DrillConfig,
    pattern: Option<&NeighborGraph>,
) -> Result<GrfModel> {
    let n = y.nrows();
    let p = y.ncols();
    if n < 2 {
        return Err(Error::TooFewPoints { n, min: 2 });
    }
    if cfg.rho < 0.0 {
        return Err(Error::invalid("rho", "must be nonnegative"));
    }
    if cfg.gamma < 0.0 {
        return Err(Error::invalid("gamma", "must be nonnegative"));
    }
    let pattern_matrix = match pattern {
        Some(g) => {
            g.require_undirected()?;
            if g.n() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("pattern graph has {} points for {n} rows", g.n()),
                });
            }
            let mut allowed = vec![vec![false; n]; n];
            for &(i, j) in g.edges() {
                allowed[i][j] = true;
                allowed[j][i] = true;
            }
            Some(allowed)
        }
        None => None,
    };

    // Canonical scaling: covariance-scale second moments and penalty.
    let mut s = (y * y.transpose()) / p as f64;
    for i in 0..n {
        s[(i, i)] += cfg.gamma;
    }
    let alpha = cfg.rho / p as f64;
    let report = graphical_lasso(&s, alpha, pattern_matrix.as_ref(), cfg)?;

    let theta = report.theta;
    let covariance = theta.clone().cholesky().map(|c| c.inverse());
    let log_likelihood = log_likelihood_dense(y, &theta)?;
    Ok(GrfModel {
        precision: theta,
        covariance,
        gamma: cfg.gamma,
        p,
        log_likelihood,
        edges: Vec::new(),
        multipliers: Vec::new(),
        constraint: Default::default(),
        converged: true,
        iterations: report.sweeps,
        warnings: Vec::new(),
    })
}

/// Embedding of a DRILL fit: identical pipeline to the unfolding embed
/// (center the implied covariance, classical scaling).
pub fn drill_embed(model: &GrfModel, q: usize) -> Result<Embedding> {
    crate::models::meu::embed_covariance(model, q, MethodTag::Drill)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd_data(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        // splitmix64-driven uniforms keep the rows in general position.
        DMatrix::from_fn(n, p, |i, j| {
            let mut z = ((i * p + j) as u64)
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(seed.wrapping_mul(0xd1342543de82ef95));
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z as f64 / u64::MAX as f64) - 0.5
        })
    }

    #[test]
    fn unpenalized_fit_recovers_analytic_precision() {
        let y = spd_data(8, 40, 1);
        let cfg = DrillConfig {
            rho: 0.0,
            ..Default::default()
        };
        let model = drill_fit(&y, &cfg, None).unwrap();
        let s = &y * y.transpose();
        let analytic = s.try_inverse().unwrap() * y.ncols() as f64;
        let rel = (&model.precision - &analytic).amax() / analytic.amax();
        assert!(rel < 1e-4, "relative error {rel}");
    }

    #[test]
    fn unpenalized_rank_deficient_is_rejected() {
        let y = spd_data(10, 3, 2);
        let cfg = DrillConfig {
            rho: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            drill_fit(&y, &cfg, None),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn huge_penalty_gives_diagonal_precision() {
        let y = spd_data(7, 30, 3);
        let s = &y * y.transpose();
        let mut max_off = 0.0f64;
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    max_off = max_off.max(s[(i, j)].abs());
                }
            }
        }
        let cfg = DrillConfig {
            rho: 1.01 * max_off,
            ..Default::default()
        };
        let model = drill_fit(&y, &cfg, None).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert!(
                        model.precision[(i, j)].abs() < 1e-10,
                        "({i},{j}) = {}",
                        model.precision[(i, j)]
                    );
                }
            }
        }
        // Subgradient optimality at zero: |p K_ij - S_ij| <= rho.
        let k = model.precision.clone().try_inverse().unwrap();
        let p = y.ncols() as f64;
        for i in 0..7 {
            for j in (i + 1)..7 {
                let g = (p * k[(i, j)] - s[(i, j)]).abs();
                assert!(g <= cfg.rho * (1.0 + 1e-8), "({i},{j}): {g} > {}", cfg.rho);
            }
        }
    }

    #[test]
    fn dual_objective_is_monotone() {
        // Correlated rows so the penalized solution keeps real structure
        // and the solver needs several sweeps.
        let base = spd_data(10, 25, 5);
        let mut y = base.clone();
        for i in 1..10 {
            for j in 0..25 {
                y[(i, j)] += 0.6 * base[(i - 1, j)];
            }
        }
        let s = (&y * y.transpose()) / 25.0;
        let cfg = DrillConfig::default();
        let report = graphical_lasso(&s, 0.003, None, &cfg).unwrap();
        assert!(report.sweeps > 1, "solver finished in {} sweeps", report.sweeps);
        for pair in report.dual_objective_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-9,
                "dual objective increased: {pair:?}"
            );
        }
        assert!(report.gap.abs() <= 1e-5);
        // The fitted precision carries off-diagonal structure.
        let mut n_off = 0;
        for i in 0..10 {
            for j in (i + 1)..10 {
                if report.theta[(i, j)].abs() > 1e-8 {
                    n_off += 1;
                }
            }
        }
        assert!(n_off > 0);
    }

    #[test]
    fn pattern_restriction_keeps_off_pattern_zero() {
        let y = spd_data(8, 30, 7);
        let graph_y = spd_data(8, 2, 11);
        let g = crate::graph::knn_graph(&graph_y, 2).unwrap();
        let cfg = DrillConfig {
            rho: 0.01,
            ..Default::default()
        };
        let model = drill_fit(&y, &cfg, Some(&g)).unwrap();
        let mut allowed = vec![vec![false; 8]; 8];
        for &(i, j) in g.edges() {
            allowed[i][j] = true;
            allowed[j][i] = true;
        }
        for i in 0..8 {
            for j in 0..8 {
                if i != j && !allowed[i][j] {
                    assert_eq!(model.precision[(i, j)], 0.0);
                }
            }
        }
    }
}
