//! Production paths against the brute-force reference implementations:
//! finite-difference gradients, Monte-Carlo distance expectations,
//! all-pairs geodesics and the dense matrix-normal density.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unfold::graph::{knn_graph, laplacian_from_multipliers};
use unfold::models::{drill_fit, geodesic_distances, meu_gradient, meu_log_likelihood, DrillConfig};
use unfold::spectral::expected_squared_distances;
use unfold_oracle::{dense_loglik, fd_gradient, floyd_warshall, mc_expected_distance};

fn gauss_data(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let normal = StandardNormal;
    DMatrix::from_fn(n, p, |_, _| normal.sample(rng))
}

/// The gradient of each edge multiplier must match central finite
/// differences of the log likelihood to five digits on a spread of
/// random instances.
#[test]
fn meu_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..20 {
        let n = rng.random_range(4..=12);
        let p = rng.random_range(1..=6);
        let k = rng.random_range(1..=3.min(n - 1));
        let y = gauss_data(n, p, &mut rng);
        let g = knn_graph(&y, k).unwrap();
        let gamma = if instance % 2 == 0 { 1e-4 } else { 1e-2 };
        let lambdas: Vec<f64> = (0..g.edges().len())
            .map(|_| rng.random_range(0.05..2.0))
            .collect();

        let analytic = meu_gradient(&y, &g, &lambdas, gamma).unwrap();
        let numeric = fd_gradient(
            |lam: &[f64]| {
                let l = laplacian_from_multipliers(&g, lam).unwrap();
                meu_log_likelihood(&y, &l, gamma).unwrap()
            },
            &lambdas,
            1e-5,
        );
        for (e, (a, f)) in analytic.iter().zip(&numeric).enumerate() {
            let scale = 1.0 + f.abs();
            assert!(
                (a - f).abs() / scale < 1e-5,
                "instance {instance}, edge {e}: analytic {a} vs fd {f}"
            );
        }
    }
}

/// The factor-of-p constant in the expected squared distance, settled by
/// sampling: the covariance formula must sit within three standard
/// errors of the Monte-Carlo mean, and the halved variant must not.
#[test]
fn expected_distance_constant_validated_by_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 5;
    let p = 4;
    let y = gauss_data(n, 2, &mut rng);
    let g = knn_graph(&y, 2).unwrap();
    let lambdas: Vec<f64> = (0..g.edges().len())
        .map(|_| rng.random_range(0.2..1.5))
        .collect();
    let l = laplacian_from_multipliers(&g, &lambdas).unwrap();
    let gamma = 0.5;

    let dense = l.to_dense() + DMatrix::identity(n, n) * gamma;
    let k = dense.try_inverse().unwrap();
    let formula = expected_squared_distances(&k, p);

    let (mc, se) = mc_expected_distance(&l.to_dense(), gamma, p, 400_000, 11).unwrap();
    for i in 0..n {
        for j in (i + 1)..n {
            let err = (formula[(i, j)] - mc[(i, j)]).abs();
            assert!(
                err <= 3.0 * se[(i, j)],
                "({i},{j}): formula {} vs mc {} +- {}",
                formula[(i, j)],
                mc[(i, j)],
                se[(i, j)]
            );
            let halved = 0.5 * formula[(i, j)];
            assert!(
                (halved - mc[(i, j)]).abs() > 10.0 * se[(i, j)],
                "halved constant should be rejected at ({i},{j})"
            );
        }
    }
}

#[test]
fn log_likelihood_matches_generic_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let n = rng.random_range(4..=10);
        let p = rng.random_range(1..=5);
        let y = gauss_data(n, p, &mut rng);
        let g = knn_graph(&y, 2.min(n - 1)).unwrap();
        let lambdas: Vec<f64> = (0..g.edges().len())
            .map(|_| rng.random_range(0.1..1.0))
            .collect();
        let l = laplacian_from_multipliers(&g, &lambdas).unwrap();
        let gamma = 0.3;
        let ours = meu_log_likelihood(&y, &l, gamma).unwrap();
        let precision = l.to_dense() + DMatrix::identity(n, n) * gamma;
        let reference = dense_loglik(&y, &precision).unwrap();
        assert!((ours - reference).abs() < 1e-8, "{ours} vs {reference}");
    }
}

/// Repeated-Dijkstra geodesics against Floyd-Warshall, exactly.
#[test]
fn geodesics_match_floyd_warshall() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..6 {
        let n = rng.random_range(20..=50);
        let y = gauss_data(n, 3, &mut rng);
        // Try successive k until connected.
        let mut k = 2;
        let g = loop {
            let g = knn_graph(&y, k).unwrap();
            if g.is_connected() {
                break g;
            }
            k += 1;
        };
        let ours = geodesic_distances(&y, &g).unwrap();

        let mut lengths = DMatrix::from_element(n, n, f64::INFINITY);
        for i in 0..n {
            lengths[(i, i)] = 0.0;
        }
        for &(i, j) in g.edges() {
            let mut d = 0.0;
            for c in 0..3 {
                d += (y[(i, c)] - y[(j, c)]).powi(2);
            }
            lengths[(i, j)] = d.sqrt();
            lengths[(j, i)] = d.sqrt();
        }
        let reference = floyd_warshall(&lengths).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (ours[(i, j)] - reference[(i, j)]).abs() < 1e-12,
                    "({i},{j}): {} vs {}",
                    ours[(i, j)],
                    reference[(i, j)]
                );
            }
        }
    }
}

/// Structure learning on a known sparse chain precision: a penalty sweep
/// must recover the true support with high recall and few false edges.
#[test]
fn drill_recovers_chain_support() {
    let n = 15;
    let p = 500;
    // Tridiagonal precision: diagonally dominant, hence positive definite.
    let mut theta_true = DMatrix::identity(n, n);
    for i in 0..n - 1 {
        theta_true[(i, i + 1)] = -0.45;
        theta_true[(i + 1, i)] = -0.45;
    }
    let cov = theta_true.clone().try_inverse().unwrap();
    let chol = cov.cholesky().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let normal = StandardNormal;
    let mut y = DMatrix::zeros(n, p);
    for j in 0..p {
        let z = DVector::from_fn(n, |_, _| normal.sample(&mut rng));
        let col = chol.l() * z;
        y.set_column(j, &col);
    }

    let mut best: Option<(f64, f64)> = None;
    for rho in [0.5, 1.0, 2.5, 5.0, 10.0, 25.0, 50.0, 100.0, 250.0] {
        let cfg = DrillConfig {
            rho,
            ..Default::default()
        };
        let model = drill_fit(&y, &cfg, None).unwrap();
        let mut tp = 0;
        let mut fp = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let detected = model.precision[(i, j)].abs() > 1e-8;
                let is_true = j == i + 1;
                if detected && is_true {
                    tp += 1;
                }
                if detected && !is_true {
                    fp += 1;
                }
            }
        }
        let recall = tp as f64 / (n - 1) as f64;
        let false_rate = fp as f64 / ((n * (n - 1) / 2) - (n - 1)) as f64;
        if recall >= 0.9 && false_rate <= 0.1 {
            best = Some((recall, false_rate));
            break;
        }
    }
    assert!(best.is_some(), "no penalty met the support targets");
}
