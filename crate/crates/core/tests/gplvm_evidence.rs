//! The scoring model against a closed-form evidence: data that is an
//! exactly linear function of the latent coordinate plus i.i.d. noise.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use unfold::eval::{gplvm_score, GplvmScoreConfig};

/// The optimized GP likelihood must approach the analytic evidence of the
/// two-parameter linear Gaussian model `y ~ N(0, v x x^T + s I)` within
/// one percent. The kernel's structural overhead (its constant-direction
/// variance) is O(1) in nats, so the bound needs enough points for the
/// per-point evidence to dominate; anything smooth in `x` would be signal
/// rather than noise, hence the seeded Gaussian draws.
#[test]
fn linear_data_approaches_analytic_evidence() {
    let n = 400;
    // Exactly centered so the signal direction is the latent vector
    // itself, keeping the comparison model exact after standardization.
    let x = DMatrix::from_fn(n, 1, |i, _| 0.1 * i as f64 - 0.1 * (n as f64 - 1.0) / 2.0);
    let sigma = 0.05;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let normal = StandardNormal;
    let raw = DMatrix::from_fn(n, 1, |i, _| {
        let z: f64 = normal.sample(&mut rng);
        2.0 * x[(i, 0)] + sigma * z
    });
    // Standardize the single feature the same way the scorer does.
    let mean = raw.column(0).mean();
    let mut y = raw.clone();
    for i in 0..n {
        y[(i, 0)] -= mean;
    }
    let std = (y.column(0).norm_squared() / n as f64).sqrt();
    for i in 0..n {
        y[(i, 0)] /= std;
    }

    // Split y into the component along x and the orthogonal rest; the
    // maximum likelihood fit matches the signal direction exactly and
    // reads the noise off the remaining n-1 directions.
    let xv = x.column(0).clone_owned();
    let yv = y.column(0).clone_owned();
    let proj = xv.dot(&yv);
    let par2 = proj * proj / xv.norm_squared();
    let perp2 = yv.norm_squared() - par2;
    let s_hat: f64 = (perp2 / (n as f64 - 1.0)).max(1e-12);
    let v_par = par2.max(s_hat);
    let tau = std::f64::consts::TAU;
    let analytic = -0.5
        * ((n as f64) * tau.ln()
            + v_par.ln()
            + (n as f64 - 1.0) * s_hat.ln()
            + par2 / v_par
            + perp2 / s_hat);

    let cfg = GplvmScoreConfig {
        restarts: 3,
        seed: 3,
        ..Default::default()
    };
    let got = gplvm_score(&y, &x, &cfg).unwrap().score;
    assert!(
        (got - analytic).abs() <= 0.01 * analytic.abs(),
        "score {got} vs analytic {analytic}"
    );
}
