//! Distance/similarity algebra, centering, symmetric eigensolvers and the
//! classical multidimensional scaling stage shared by every method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense symmetric eigendecomposition is used up to this size; above it the
/// embedding routines fall back to subspace iteration for the few extremal
/// pairs they need.
pub const DENSE_EIGEN_LIMIT: usize = 2048;

/// Matrix of squared Euclidean distances between rows of `y`, with an
/// exact zero diagonal.
pub fn squared_distances(y: &DMatrix<f64>) -> DMatrix<f64> {
    let n = y.nrows();
    let gram = y * y.transpose();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (gram[(i, i)] - 2.0 * gram[(i, j)] + gram[(j, j)]).max(0.0);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Double centering `H K H` with `H = I - n^{-1} 1 1^T`, computed through
/// row/column means rather than explicit products.
pub fn center(k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).sum() / nf).collect();
    let col_means: Vec<f64> = (0..n).map(|j| k.column(j).sum() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// Converts squared distances to a centered similarity matrix,
/// `B = -1/2 H D H`.
pub fn distances_to_similarities(d: &DMatrix<f64>) -> DMatrix<f64> {
    center(d) * -0.5
}

/// Expected squared distances of a Gaussian random field with covariance
/// `k` over `p` independent features:
/// `<d_ij> = p (k_ii - 2 k_ij + k_jj)`.
///
/// The per-feature difference `y_i - y_j` has variance
/// `k_ii - 2 k_ij + k_jj`, and the `p` features contribute independently,
/// which fixes the constant (verified against direct sampling in the
/// test suite).
pub fn expected_squared_distances(k: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    let n = k.nrows();
    let pf = p as f64;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = pf * (k[(i, i)] - 2.0 * k[(i, j)] + k[(j, j)]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Which embedding family produced a set of coordinates; determines how
/// the stored eigenvalues are ordered (descending similarity eigenvalues
/// for the CMDS family, ascending Laplacian eigenvalues otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    Cmds,
    KernelPca,
    Meu,
    Drill,
    Isomap,
    Lle,
    Alle,
    LaplacianEigenmaps { normalized: bool },
}

impl MethodTag {
    pub fn name(&self) -> &'static str {
        match self {
            MethodTag::Cmds => "cmds",
            MethodTag::KernelPca => "kpca",
            MethodTag::Meu => "meu",
            MethodTag::Drill => "drill",
            MethodTag::Isomap => "isomap",
            MethodTag::Lle => "lle",
            MethodTag::Alle => "alle",
            MethodTag::LaplacianEigenmaps { .. } => "le",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct EmbeddingDiagnostics {
    /// Positive eigenvalue mass left out of the embedding.
    pub discarded_positive_mass: f64,
    /// Total magnitude of negative similarity eigenvalues (nonzero for
    /// isomap, whose filled-in distances need not be Euclidean).
    pub negative_mass: f64,
}

/// Latent coordinates plus the retained spectrum and diagnostics.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `n x q` coordinates, one row per data point.
    pub coords: DMatrix<f64>,
    /// Eigenvalue associated with each coordinate column.
    pub eigenvalues: Vec<f64>,
    pub method: MethodTag,
    pub diagnostics: EmbeddingDiagnostics,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.coords.nrows()
    }

    pub fn q(&self) -> usize {
        self.coords.ncols()
    }
}

/// Eigenpairs of a symmetric problem, eigenvalues ascending, eigenvectors
/// as matching columns with a deterministic sign (first coordinate of
/// non-negligible magnitude is positive).
#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: format!("matrix is {}x{}, expected square", a.nrows(), a.ncols()),
        });
    }
    let mut max_asym = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_asym = max_asym.max((a[(i, j)] - a[(j, i)]).abs());
            scale = scale.max(a[(i, j)].abs()).max(a[(j, i)].abs());
        }
        scale = scale.max(a[(i, i)].abs());
    }
    if max_asym > 1e-8 * scale.max(1e-300) && max_asym > 1e-12 {
        return Err(Error::NotSymmetric {
            max_asymmetry: max_asym,
        });
    }
    Ok(())
}

/// Flips a vector in place so its first entry of non-negligible magnitude
/// is positive. Eigenvectors are only defined up to sign; this makes the
/// choice deterministic.
pub(crate) fn fix_sign(v: &mut DVector<f64>) {
    let max = v.amax();
    if max == 0.0 {
        return;
    }
    let threshold = 1e-12 * max;
    for i in 0..v.len() {
        if v[i].abs() > threshold {
            if v[i] < 0.0 {
                *v *= -1.0;
            }
            return;
        }
    }
}

fn fix_column_signs(m: &mut DMatrix<f64>) {
    for c in 0..m.ncols() {
        let mut col = m.column(c).clone_owned();
        fix_sign(&mut col);
        m.set_column(c, &col);
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigenPairs> {
    check_symmetric(a)?;
    let n = a.nrows();
    // Symmetrize exactly to stop last-ulp asymmetry from leaking into the
    // decomposition.
    let sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]));
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (out_col, &src) in order.iter().enumerate() {
        vectors.set_column(out_col, &eig.eigenvectors.column(src));
    }
    fix_column_signs(&mut vectors);
    Ok(EigenPairs { values, vectors })
}

/// Generalized symmetric problem `L u = lambda D u` with positive diagonal
/// `D`, solved through the normalized form `D^{-1/2} L D^{-1/2}`.
/// Eigenvectors are `D`-orthonormal.
pub fn gen_eig(l: &DMatrix<f64>, d: &DVector<f64>) -> Result<EigenPairs> {
    if d.len() != l.nrows() {
        return Err(Error::DimensionMismatch {
            context: format!("diagonal has {} entries for a {} matrix", d.len(), l.nrows()),
        });
    }
    for (i, &di) in d.iter().enumerate() {
        if !(di > 0.0) {
            return Err(Error::NonPositiveDegree { index: i });
        }
    }
    let inv_sqrt: Vec<f64> = d.iter().map(|&v| 1.0 / v.sqrt()).collect();
    let n = l.nrows();
    let normalized = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * l[(i, j)] * inv_sqrt[j]);
    let pairs = sym_eig(&normalized)?;
    // Map back: u = D^{-1/2} v, already D-orthonormal since v^T v = 1.
    let mut vectors = pairs.vectors;
    for i in 0..n {
        for c in 0..n {
            vectors[(i, c)] *= inv_sqrt[i];
        }
    }
    fix_column_signs(&mut vectors);
    Ok(EigenPairs {
        values: pairs.values,
        vectors,
    })
}

/// Which end of the spectrum a partial solve should target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumEnd {
    Largest,
    Smallest,
}

/// Extremal eigenpairs by deterministic blocked subspace iteration with a
/// Rayleigh-Ritz step. Intended for sizes past [`DENSE_EIGEN_LIMIT`] where
/// a full decomposition is wasteful; the operator is only touched through
/// matrix-vector products.
///
/// Returns eigenvalues ascending (like [`sym_eig`]) restricted to the `k`
/// requested pairs.
pub fn sym_eig_partial(
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    n: usize,
    k: usize,
    end: SpectrumEnd,
) -> Result<EigenPairs> {
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch {
            context: format!("requested {k} eigenpairs of an order-{n} operator"),
        });
    }
    // Gershgorin-style bound on the spectral radius via a few power steps.
    let mut probe = DVector::from_fn(n, |i, _| deterministic_unit(i as u64, 0x9e3779b97f4a7c15));
    probe /= probe.norm();
    let mut bound = 1.0;
    for _ in 0..12 {
        let next = apply(&probe);
        bound = next.norm().max(1e-300);
        probe = next / bound;
    }
    let shift = 1.25 * bound + 1.0;
    // Work with an operator whose LARGEST eigenvalues are the requested end.
    let op = |v: &DVector<f64>| -> DVector<f64> {
        match end {
            SpectrumEnd::Largest => apply(v) + v * shift,
            SpectrumEnd::Smallest => v * shift - apply(v),
        }
    };

    let block = (k + 6).min(n);
    let mut q = DMatrix::from_fn(n, block, |i, j| {
        deterministic_unit(i as u64, 0x5eed_0000 + j as u64)
    });
    orthonormalize(&mut q);
    let max_iters = 5000;
    let resid_tol = 1e-10 * bound.max(1.0);
    let mut ritz_values = vec![0.0; block];
    let mut ritz_vectors = q.clone();
    for _iter in 0..max_iters {
        let mut z = DMatrix::zeros(n, block);
        for c in 0..block {
            z.set_column(c, &op(&q.column(c).clone_owned()));
        }
        // Rayleigh-Ritz on the current block.
        let small = q.transpose() * &z;
        let small_sym = DMatrix::from_fn(block, block, |i, j| 0.5 * (small[(i, j)] + small[(j, i)]));
        let eig = small_sym.symmetric_eigen();
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let rot = DMatrix::from_fn(block, block, |i, j| eig.eigenvectors[(i, order[j])]);
        let z_rot = &z * &rot;
        let q_rot = &q * &rot;
        ritz_values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        ritz_vectors = q_rot.clone();
        // Residuals of the k targeted pairs under the shifted operator,
        // identical to the unshifted residuals.
        let mut max_resid = 0.0f64;
        for c in 0..k {
            let r = (z_rot.column(c) - q_rot.column(c) * ritz_values[c]).norm();
            max_resid = max_resid.max(r);
        }
        if max_resid <= resid_tol {
            break;
        }
        q = z_rot;
        orthonormalize(&mut q);
    }

    // Undo the spectral mapping and emit ascending order.
    let mut pairs: Vec<(f64, DVector<f64>)> = (0..k)
        .map(|c| {
            let mut v = ritz_vectors.column(c).clone_owned();
            let norm = v.norm();
            if norm > 0.0 {
                v /= norm;
            }
            let raw = match end {
                SpectrumEnd::Largest => ritz_values[c] - shift,
                SpectrumEnd::Smallest => shift - ritz_values[c],
            };
            (raw, v)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, (_, v)) in pairs.into_iter().enumerate() {
        vectors.set_column(c, &v);
    }
    fix_column_signs(&mut vectors);
    Ok(EigenPairs { values, vectors })
}

fn deterministic_unit(i: u64, salt: u64) -> f64 {
    // splitmix64; gives reproducible quasi-random starting blocks without
    // dragging an RNG dependency into the solver.
    let mut z = i.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(salt);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z = z ^ (z >> 31);
    (z as f64 / u64::MAX as f64) - 0.5
}

fn orthonormalize(q: &mut DMatrix<f64>) {
    let cols = q.ncols();
    for j in 0..cols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci = q.column(i).clone_owned();
                let mut cj = q.column_mut(j);
                cj.axpy(-proj, &ci, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm > 1e-300 {
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
}

/// Classical multidimensional scaling: track the top `q` eigenpairs of a
/// centered similarity matrix and scale each eigenvector by the square
/// root of its eigenvalue. Negative eigenvalues are clamped to zero for
/// the coordinates and accounted in the diagnostics.
pub fn cmds_embed(b: &DMatrix<f64>, q: usize) -> Result<Embedding> {
    cmds_embed_tagged(b, q, MethodTag::Cmds)
}

pub(crate) fn cmds_embed_tagged(b: &DMatrix<f64>, q: usize, tag: MethodTag) -> Result<Embedding> {
    let n = b.nrows();
    if q == 0 || q > n.saturating_sub(1) {
        return Err(Error::QOutOfRange { q, n });
    }
    let (values_desc, vectors) = if n <= DENSE_EIGEN_LIMIT {
        let pairs = sym_eig(b)?;
        let values: Vec<f64> = pairs.values.iter().rev().copied().collect();
        let mut vecs = DMatrix::zeros(n, n);
        for c in 0..n {
            vecs.set_column(c, &pairs.vectors.column(n - 1 - c));
        }
        (values, vecs)
    } else {
        check_symmetric(b)?;
        let apply = move |v: &DVector<f64>| b * v;
        let pairs = sym_eig_partial(&apply, n, q, SpectrumEnd::Largest)?;
        let values: Vec<f64> = pairs.values.iter().rev().copied().collect();
        let k = pairs.values.len();
        let mut vecs = DMatrix::zeros(n, k);
        for c in 0..k {
            vecs.set_column(c, &pairs.vectors.column(k - 1 - c));
        }
        (values, vecs)
    };

    let mut coords = DMatrix::zeros(n, q);
    let mut eigenvalues = Vec::with_capacity(q);
    for c in 0..q {
        let ev = values_desc[c];
        eigenvalues.push(ev);
        let scale = ev.max(0.0).sqrt();
        let col = vectors.column(c) * scale;
        coords.set_column(c, &col);
    }
    let mut discarded = 0.0;
    let mut negative = 0.0;
    for (idx, &ev) in values_desc.iter().enumerate() {
        if ev < 0.0 {
            negative += -ev;
        } else if idx >= q {
            discarded += ev;
        }
    }
    Ok(Embedding {
        coords,
        eigenvalues,
        method: tag,
        diagnostics: EmbeddingDiagnostics {
            discarded_positive_mass: discarded,
            negative_mass: negative,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    /// `k(y, y') = exp(-gamma ||y - y'||^2)`.
    Rbf { gamma: f64 },
}

/// Kernel principal components: center the kernel matrix and run CMDS.
pub fn kernel_pca(y: &DMatrix<f64>, kernel: Kernel, q: usize) -> Result<Embedding> {
    let n = y.nrows();
    let k = match kernel {
        Kernel::Linear => y * y.transpose(),
        Kernel::Rbf { gamma } => {
            if !(gamma > 0.0) {
                return Err(Error::invalid("gamma", "rbf bandwidth must be positive"));
            }
            let d = squared_distances(y);
            DMatrix::from_fn(n, n, |i, j| (-gamma * d[(i, j)]).exp())
        }
    };
    let b = center(&k);
    cmds_embed_tagged(&b, q, MethodTag::KernelPca)
}
