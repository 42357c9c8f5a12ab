//! Embedding quality scoring and the method comparison protocol.

mod compare;
mod gplvm;

pub use compare::{
    compare_methods, run_method, score_table_csv, score_table_text, CompareConfig, Method,
    MethodOutcome,
};
pub use gplvm::{gplvm_score, GplvmScore, GplvmScoreConfig};
