//! Brute-force reference implementations used by the `unfold` test suites.
//!
//! Everything in this crate is deliberately naive (dense, O(n^3) or worse)
//! and shares no code with the production algorithms it checks. It is a
//! dev-dependency only; production paths must never import it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("edge length matrix has a negative entry at ({0}, {1})")]
    NegativeLength(usize, usize),

    #[error("precision matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Central finite-difference gradient of `f` at `x`.
///
/// Each coordinate uses a step `h * (1 + |x_i|)` so the scheme stays
/// well scaled for both tiny and large parameter values. Halving `h`
/// shrinks the truncation error roughly fourfold.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let hi = h * (1.0 + x[i].abs());
        probe[i] = x[i] + hi;
        let fp = f(&probe);
        probe[i] = x[i] - hi;
        let fm = f(&probe);
        probe[i] = x[i];
        grad.push((fp - fm) / (2.0 * hi));
    }
    grad
}

/// All-pairs shortest path distances by Floyd–Warshall.
///
/// `lengths[(i, j)]` is the direct edge length between `i` and `j`, with
/// `f64::INFINITY` marking the absence of an edge. Unreachable pairs keep
/// the infinity sentinel in the output.
pub fn floyd_warshall(lengths: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = lengths.nrows();
    if lengths.ncols() != n {
        return Err(OracleError::NotSquare(lengths.nrows(), lengths.ncols()));
    }
    for i in 0..n {
        for j in 0..n {
            if lengths[(i, j)] < 0.0 {
                return Err(OracleError::NegativeLength(i, j));
            }
        }
    }
    let mut dist = lengths.clone();
    for i in 0..n {
        dist[(i, i)] = 0.0;
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[(i, k)];
            if dik.is_infinite() {
                continue;
            }
            for j in 0..n {
                let through = dik + dist[(k, j)];
                if through < dist[(i, j)] {
                    dist[(i, j)] = through;
                }
            }
        }
    }
    Ok(dist)
}

/// Monte-Carlo estimate of the expected squared inter-point distances of a
/// Gaussian random field with precision `L + gamma I` over `p` features.
///
/// Feature columns are sampled i.i.d. from `N(0, (L + gamma I)^{-1})`.
/// Returns the estimated mean matrix together with per-entry standard
/// errors of the mean.
pub fn mc_expected_distance(
    l: &DMatrix<f64>,
    gamma: f64,
    p: usize,
    samples: usize,
    seed: u64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(OracleError::NotSquare(l.nrows(), l.ncols()));
    }
    let precision = l + DMatrix::identity(n, n) * gamma;
    let chol = precision
        .clone()
        .cholesky()
        .ok_or(OracleError::NotPositiveDefinite)?;
    // Covariance factor: K = (R R^T)^{-1} with R the precision Cholesky,
    // so y = R^{-T} z has covariance K for z ~ N(0, I).
    let r_t = chol.l().transpose();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let mut sum = DMatrix::<f64>::zeros(n, n);
    let mut sum_sq = DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        let z = DVector::<f64>::from_fn(n, |_, _| normal.sample(&mut rng));
        let y = r_t
            .solve_upper_triangular(&z)
            .ok_or(OracleError::NotPositiveDefinite)?;
        for i in 0..n {
            for j in 0..n {
                // One feature contributes (y_i - y_j)^2; p independent
                // features scale both mean and spread linearly in p.
                let d = (y[i] - y[j]).powi(2);
                sum[(i, j)] += d;
                sum_sq[(i, j)] += d * d;
            }
        }
    }
    let s = samples as f64;
    let mut mean = DMatrix::<f64>::zeros(n, n);
    let mut se = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let m1 = sum[(i, j)] / s;
            let var = (sum_sq[(i, j)] / s - m1 * m1).max(0.0);
            mean[(i, j)] = p as f64 * m1;
            se[(i, j)] = p as f64 * (var / s).sqrt();
        }
    }
    Ok((mean, se))
}

/// Log density of the matrix normal with independent feature columns:
/// each column of `y` is `N(0, precision^{-1})`.
///
/// Computed per column through an eigendecomposition, a different route
/// from the Cholesky-based production likelihood it cross-checks.
pub fn dense_loglik(y: &DMatrix<f64>, precision: &DMatrix<f64>) -> Result<f64> {
    let n = y.nrows();
    let p = y.ncols();
    if precision.nrows() != n || precision.ncols() != n {
        return Err(OracleError::NotSquare(precision.nrows(), precision.ncols()));
    }
    let eig = precision.clone().symmetric_eigen();
    let mut log_det = 0.0;
    for &ev in eig.eigenvalues.iter() {
        if ev <= 0.0 {
            return Err(OracleError::NotPositiveDefinite);
        }
        log_det += ev.ln();
    }
    let tau = std::f64::consts::TAU;
    let mut total = 0.0;
    for j in 0..p {
        let col = y.column(j);
        let quad = (precision * col).dot(&col);
        total += 0.5 * log_det - 0.5 * (n as f64) * tau.ln() - 0.5 * quad;
    }
    Ok(total)
}

/// Orthogonal Procrustes residual between two coordinate sets.
///
/// Finds the orthogonal matrix (and, when `allow_scale` is set, the
/// isotropic scale) minimizing `|| s * A R - B ||_F` and returns that
/// minimum divided by `||B||_F`.
pub fn procrustes_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, allow_scale: bool) -> f64 {
    assert_eq!(a.nrows(), b.nrows(), "row mismatch in procrustes");
    assert_eq!(a.ncols(), b.ncols(), "column mismatch in procrustes");
    let m = a.transpose() * b;
    let svd = m.svd(true, true);
    let u = svd.u.as_ref().expect("svd u");
    let v_t = svd.v_t.as_ref().expect("svd v_t");
    let rot = u * v_t;
    let aligned = a * rot;
    let scale = if allow_scale {
        let num: f64 = aligned.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        let den: f64 = aligned.iter().map(|x| x * x).sum();
        if den > 0.0 {
            num / den
        } else {
            1.0
        }
    } else {
        1.0
    };
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let resid = (aligned * scale - b).iter().map(|x| x * x).sum::<f64>().sqrt();
    if b_norm > 0.0 {
        resid / b_norm
    } else {
        resid
    }
}
