//! Full-neighborhood limits: with every pair connected, the unfolding
//! fit and the acyclic variant reproduce principal coordinates, while
//! standard LLE does not.

use nalgebra::DMatrix;
use unfold::graph::{acyclic_graph, knn_graph};
use unfold::models::{
    alle_embed, alle_fit, lle_embed, lle_weights, meu_embed, meu_fit, meu_kkt_report, AlleConfig,
    MeuFitConfig, MultiplierConstraint,
};
use unfold::spectral::{kernel_pca, Kernel};
use unfold_oracle::procrustes_residual;

fn random_data(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
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

/// Principal-coordinate scores through an independent route: eigenvectors
/// of the feature covariance applied to centered data.
fn pca_scores(y: &DMatrix<f64>, q: usize) -> DMatrix<f64> {
    let n = y.nrows();
    let p = y.ncols();
    let mean = y.row_mean();
    let centered = DMatrix::from_fn(n, p, |i, j| y[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut scores = DMatrix::zeros(n, q);
    for c in 0..q {
        let dir = eig.eigenvectors.column(order[c]);
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..p {
                s += centered[(i, j)] * dir[j];
            }
            scores[(i, c)] = s;
        }
    }
    scores
}

#[test]
fn kernel_pca_linear_equals_covariance_pca() {
    let y = random_data(20, 5, 1);
    let emb = kernel_pca(&y, Kernel::Linear, 5).unwrap();
    let scores = pca_scores(&y, 5);
    let resid = procrustes_residual(&emb.coords, &scores, false);
    assert!(resid < 1e-8, "residual {resid}");
}

#[test]
fn meu_complete_graph_recovers_pca() {
    // The complete-graph identity needs sign-free multipliers: the
    // equality solution is repulsive on most pairs, so the attractive
    // variant clamps and lands elsewhere (checked below).
    let y = random_data(20, 5, 2);
    let g = knn_graph(&y, 19).unwrap();
    let cfg = MeuFitConfig {
        constraint: MultiplierConstraint::Unconstrained,
        kkt_tol: 1e-6,
        ..Default::default()
    };
    let model = meu_fit(&y, &g, &cfg).unwrap();
    let emb = meu_embed(&model, 5).unwrap();
    let scores = pca_scores(&y, 5);
    // The fitted covariance reproduces the squared distances up to the
    // feature-count scale, so alignment absorbs one isotropic factor.
    let resid = procrustes_residual(&emb.coords, &scores, true);
    assert!(resid < 1e-6, "residual {resid}");
}

#[test]
fn meu_attractive_complete_graph_stays_kkt_but_not_pca() {
    let y = random_data(20, 5, 2);
    let g = knn_graph(&y, 19).unwrap();
    let cfg = MeuFitConfig {
        kkt_tol: 1e-6,
        ..Default::default()
    };
    let model = meu_fit(&y, &g, &cfg).unwrap();
    let report = meu_kkt_report(&model, &y).unwrap();
    assert!(report.residual() <= 1e-3 * report.mean_edge_distance);
    // Many pairs want repulsion, so the clamped fit is far from the
    // principal coordinates.
    let emb = meu_embed(&model, 5).unwrap();
    let resid = procrustes_residual(&emb.coords, &pca_scores(&y, 5), true);
    assert!(resid > 1e-2, "residual unexpectedly small: {resid}");
}

#[test]
fn alle_full_triangular_recovers_pca() {
    let y = random_data(20, 5, 3);
    let ordering: Vec<usize> = (0..20).collect();
    let g = acyclic_graph(&y, 19, &ordering).unwrap();
    let cfg = AlleConfig {
        ridge: 1e-9,
        ..Default::default()
    };
    let fit = alle_fit(&y, &g, &cfg).unwrap();
    let emb = alle_embed(&fit, 5).unwrap();
    let scores = pca_scores(&y, 5);
    let resid = procrustes_residual(&emb.coords, &scores, true);
    assert!(resid < 1e-4, "residual {resid}");
}

#[test]
fn lle_full_neighborhood_does_not_recover_pca() {
    let y = random_data(20, 5, 2);
    let g = knn_graph(&y, 19).unwrap();
    let w = lle_weights(&y, &g, 1e-6).unwrap();
    let emb = lle_embed(&w, 5).unwrap();
    let scores = pca_scores(&y, 5);
    let lle_resid = procrustes_residual(&emb.coords, &scores, true);

    // Same data, same alignment freedom: the unfolding fit must beat the
    // pseudolikelihood fit by an order of magnitude.
    let cfg = MeuFitConfig {
        constraint: MultiplierConstraint::Unconstrained,
        kkt_tol: 1e-6,
        ..Default::default()
    };
    let model = meu_fit(&y, &g, &cfg).unwrap();
    let meu_resid = procrustes_residual(&meu_embed(&model, 5).unwrap().coords, &scores, true);
    assert!(
        lle_resid > 10.0 * meu_resid.max(1e-4),
        "lle {lle_resid} vs meu {meu_resid}"
    );
}
