use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {min} data points, got {n}")]
    TooFewPoints { n: usize, min: usize },

    #[error("neighbor count k={k} out of range for n={n} points")]
    KOutOfRange { k: usize, n: usize },

    #[error("latent dimension q={q} out of range for n={n} points")]
    QOutOfRange { q: usize, n: usize },

    #[error("ordering is not a permutation of 0..{n}")]
    InvalidPermutation { n: usize },

    #[error("parameter {name} is invalid: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("operation requires an {expected} graph")]
    WrongGraphKind { expected: &'static str },

    #[error("value supplied for ({i}, {j}) which is not an edge of the graph")]
    EdgeOffGraph { i: usize, j: usize },

    #[error("graph is disconnected: components {summary}")]
    Disconnected { summary: String },

    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:.3e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("matrix is not positive definite ({context})")]
    NotPositiveDefinite { context: &'static str },

    #[error("degree entry {index} is not positive")]
    NonPositiveDegree { index: usize },

    #[error(
        "local system for point {point} is singular; pass a nonzero ridge to regularize it"
    )]
    SingularLocalSystem { point: usize },

    #[error("point {point} has no neighbors")]
    EmptyNeighborhood { point: usize },

    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("eigensolver failed: {context}")]
    EigenFailure { context: &'static str },

    #[error("unknown dataset generator '{0}'")]
    UnknownGenerator(String),

    #[error("unknown method '{0}'")]
    UnknownMethod(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Summarizes connected components for error messages: sizes plus a
/// representative member of each, capped so messages stay one line.
pub(crate) fn component_summary(components: &[Vec<usize>]) -> String {
    let mut parts: Vec<String> = components
        .iter()
        .take(8)
        .map(|c| format!("{{size {} at {}}}", c.len(), c[0]))
        .collect();
    if components.len() > 8 {
        parts.push(format!("... {} total", components.len()));
    }
    parts.join(", ")
}
