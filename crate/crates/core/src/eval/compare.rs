//! Runs a set of embedding methods on one dataset and scores each with
//! the Gaussian-process likelihood, producing a ranked table.

use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::eval::gplvm::{gplvm_score, GplvmScoreConfig};
use crate::graph::knn_graph;
use crate::models::{
    alle_pipeline, drill_embed, drill_fit, isomap, laplacian_eigenmaps, lle_embed, lle_weights,
    meu_embed, meu_fit, AlleConfig, DrillConfig, EigenmapsOpts, MeuFitConfig,
};
use crate::spectral::{kernel_pca, squared_distances, Embedding, Kernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Meu,
    Lle,
    Alle,
    Le,
    Isomap,
    Drill,
    Kpca,
    Pca,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Meu,
        Method::Lle,
        Method::Alle,
        Method::Le,
        Method::Isomap,
        Method::Drill,
        Method::Kpca,
        Method::Pca,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Meu => "meu",
            Method::Lle => "lle",
            Method::Alle => "alle",
            Method::Le => "le",
            Method::Isomap => "isomap",
            Method::Drill => "drill",
            Method::Kpca => "kpca",
            Method::Pca => "pca",
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "meu" => Ok(Method::Meu),
            "lle" => Ok(Method::Lle),
            "alle" => Ok(Method::Alle),
            "le" => Ok(Method::Le),
            "isomap" => Ok(Method::Isomap),
            "drill" => Ok(Method::Drill),
            "kpca" => Ok(Method::Kpca),
            "pca" => Ok(Method::Pca),
            other => Err(Error::UnknownMethod(other.to_string())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub k: usize,
    pub q: usize,
    /// Base-density precision for the unfolding fit.
    pub gamma: f64,
    /// Local-regression ridge for LLE and its acyclic variant.
    pub ridge: f64,
    /// Heat-kernel bandwidth; when set, Laplacian eigenmaps uses weighted
    /// edges and kernel PCA uses it as the rbf width.
    pub sigma: Option<f64>,
    /// L1 penalty for the structure learner.
    pub rho: f64,
    /// Candidate-edge neighborhood size for the structure learner
    /// (`None` learns over all pairs).
    pub drill_k: Option<usize>,
    pub eps_last: f64,
    pub seed: u64,
    pub meu_max_iters: usize,
    pub gplvm: GplvmScoreConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            k: 6,
            q: 2,
            gamma: 1e-4,
            ridge: 1e-6,
            sigma: None,
            rho: 0.1,
            drill_k: Some(20),
            eps_last: 1e-3,
            seed: 0,
            meu_max_iters: 2000,
            gplvm: GplvmScoreConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub score: Option<f64>,
    pub error: Option<String>,
    pub runtime: Duration,
    pub warnings: Vec<String>,
}

/// Runs one method end to end. Isomap may drop points on a disconnected
/// graph; the score is then computed on the retained rows.
pub fn run_method(y: &DMatrix<f64>, method: Method, cfg: &CompareConfig) -> Result<Embedding> {
    let q = cfg.q;
    match method {
        Method::Pca => kernel_pca(y, Kernel::Linear, q),
        Method::Kpca => {
            let sigma = cfg.sigma.unwrap_or_else(|| default_bandwidth(y));
            kernel_pca(y, Kernel::Rbf { gamma: 1.0 / (2.0 * sigma * sigma) }, q)
        }
        Method::Meu => {
            let g = knn_graph(y, cfg.k)?;
            let fit_cfg = MeuFitConfig {
                gamma: cfg.gamma,
                max_iters: cfg.meu_max_iters,
                ..Default::default()
            };
            let model = meu_fit(y, &g, &fit_cfg)?;
            meu_embed(&model, q)
        }
        Method::Lle => {
            let g = knn_graph(y, cfg.k)?;
            let w = lle_weights(y, &g, cfg.ridge)?;
            lle_embed(&w, q)
        }
        Method::Alle => {
            let ordering: Vec<usize> = (0..y.nrows()).collect();
            let alle_cfg = AlleConfig {
                eps_last: cfg.eps_last,
                ridge: cfg.ridge,
                per_point_residual: false,
            };
            let (_, emb) = alle_pipeline(y, cfg.k, &ordering, &alle_cfg, q)?;
            Ok(emb)
        }
        Method::Le => {
            let g = knn_graph(y, cfg.k)?;
            let opts = EigenmapsOpts {
                weighted: cfg.sigma.is_some(),
                sigma: cfg.sigma,
                normalized: true,
            };
            laplacian_eigenmaps(y, &g, q, &opts)
        }
        Method::Isomap => {
            let g = knn_graph(y, cfg.k)?;
            let res = isomap(y, &g, q, false)?;
            if res.kept.len() != y.nrows() {
                return Err(Error::Disconnected {
                    summary: format!(
                        "isomap kept {} of {} points; run it directly for the partial embedding",
                        res.kept.len(),
                        y.nrows()
                    ),
                });
            }
            Ok(res.embedding)
        }
        Method::Drill => {
            let pattern = match cfg.drill_k {
                Some(k) => Some(knn_graph(y, k.min(y.nrows().saturating_sub(1)).max(1))?),
                None => None,
            };
            let drill_cfg = DrillConfig {
                rho: cfg.rho,
                ..Default::default()
            };
            let model = drill_fit(y, &drill_cfg, pattern.as_ref())?;
            drill_embed(&model, q)
        }
    }
}

fn default_bandwidth(y: &DMatrix<f64>) -> f64 {
    let d = squared_distances(y);
    let n = y.nrows();
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            total += d[(i, j)];
            count += 1;
        }
    }
    if count == 0 || total <= 0.0 {
        1.0
    } else {
        (total / count as f64 / 2.0).sqrt()
    }
}

/// Runs and scores each requested method; failures become table rows
/// rather than errors. Rows are sorted by score descending with failed
/// methods last.
pub fn compare_methods(
    y: &DMatrix<f64>,
    methods: &[Method],
    cfg: &CompareConfig,
) -> Vec<MethodOutcome> {
    let mut gplvm_cfg = cfg.gplvm.clone();
    gplvm_cfg.seed = cfg.seed;
    let mut outcomes: Vec<MethodOutcome> = methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let result = run_method(y, method, cfg)
                .and_then(|emb| gplvm_score(y, &emb.coords, &gplvm_cfg));
            let runtime = start.elapsed();
            match result {
                Ok(score) => MethodOutcome {
                    method,
                    score: Some(score.score),
                    error: None,
                    runtime,
                    warnings: if score.degenerate_latent {
                        vec!["degenerate latent coordinates".into()]
                    } else {
                        Vec::new()
                    },
                },
                Err(e) => MethodOutcome {
                    method,
                    score: None,
                    error: Some(e.to_string()),
                    runtime,
                    warnings: Vec::new(),
                },
            }
        })
        .collect();
    outcomes.sort_by(|a, b| match (a.score, b.score) {
        (Some(sa), Some(sb)) => sb.total_cmp(&sa),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.method.cmp(&b.method),
    });
    outcomes
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// CSV form of the score table. Runtimes are an in-memory diagnostic and
/// deliberately left out so identical runs serialize identically.
pub fn score_table_csv(outcomes: &[MethodOutcome]) -> String {
    let mut out = String::from("rank,method,score,status\n");
    for (rank, o) in outcomes.iter().enumerate() {
        let score = o
            .score
            .map(|s| format!("{s:.16e}"))
            .unwrap_or_default();
        let status = match &o.error {
            Some(e) => format!("error: {e}"),
            None => "ok".to_string(),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            rank + 1,
            o.method.as_str(),
            score,
            csv_field(&status)
        ));
    }
    out
}

/// Fixed-width text form of the score table, optionally with runtimes
/// (excluded from file outputs to keep them reproducible).
pub fn score_table_text(outcomes: &[MethodOutcome], include_runtime: bool) -> String {
    let mut out = String::new();
    if include_runtime {
        out.push_str(&format!(
            "{:<4} {:<8} {:>18} {:>12}  {}\n",
            "rank", "method", "score", "runtime_ms", "status"
        ));
    } else {
        out.push_str(&format!("{:<4} {:<8} {:>18}  {}\n", "rank", "method", "score", "status"));
    }
    for (rank, o) in outcomes.iter().enumerate() {
        let score = o
            .score
            .map(|s| format!("{s:.6}"))
            .unwrap_or_else(|| "-".to_string());
        let status = match &o.error {
            Some(e) => format!("error: {e}"),
            None => "ok".to_string(),
        };
        if include_runtime {
            out.push_str(&format!(
                "{:<4} {:<8} {:>18} {:>12.3}  {}\n",
                rank + 1,
                o.method.as_str(),
                score,
                o.runtime.as_secs_f64() * 1e3,
                status
            ));
        } else {
            out.push_str(&format!(
                "{:<4} {:<8} {:>18}  {}\n",
                rank + 1,
                o.method.as_str(),
                score,
                status
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{generate, GeneratorName};

    #[test]
    fn table_has_one_row_per_method_and_is_sorted() {
        let data = generate(GeneratorName::Ring, 40, 0.02, 3).unwrap();
        let cfg = CompareConfig {
            k: 4,
            gplvm: GplvmScoreConfig {
                restarts: 1,
                max_iters: 40,
                ..Default::default()
            },
            ..Default::default()
        };
        let methods = [Method::Pca, Method::Isomap, Method::Lle];
        let outcomes = compare_methods(&data.y, &methods, &cfg);
        assert_eq!(outcomes.len(), 3);
        for pair in outcomes.windows(2) {
            if let (Some(a), Some(b)) = (pair[0].score, pair[1].score) {
                assert!(a >= b);
            }
        }
        for o in &outcomes {
            assert!(o.runtime > Duration::ZERO);
        }
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let data = generate(GeneratorName::Ring, 30, 0.05, 9).unwrap();
        let cfg = CompareConfig {
            k: 4,
            seed: 21,
            gplvm: GplvmScoreConfig {
                restarts: 2,
                max_iters: 40,
                ..Default::default()
            },
            ..Default::default()
        };
        let methods = [Method::Pca, Method::Lle];
        let a = compare_methods(&data.y, &methods, &cfg);
        let b = compare_methods(&data.y, &methods, &cfg);
        assert_eq!(score_table_csv(&a), score_table_csv(&b));
    }

    #[test]
    fn failed_method_becomes_error_row() {
        // Two far clusters with k=1 disconnect the graph; isomap reports
        // the failure in its row while pca still succeeds.
        let y = DMatrix::from_row_slice(12, 1, &[
            0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 9.0, 9.01, 9.02, 9.03, 9.04, 9.05,
        ]);
        let cfg = CompareConfig {
            k: 1,
            q: 1,
            gplvm: GplvmScoreConfig {
                restarts: 1,
                max_iters: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let outcomes = compare_methods(&y, &[Method::Isomap, Method::Pca], &cfg);
        let isomap_row = outcomes.iter().find(|o| o.method == Method::Isomap).unwrap();
        assert!(isomap_row.error.is_some());
        assert!(isomap_row.score.is_none());
        // Failed rows sort last.
        assert_eq!(outcomes.last().unwrap().method, Method::Isomap);
        let csv = score_table_csv(&outcomes);
        assert!(csv.contains("error:"));
    }
}
