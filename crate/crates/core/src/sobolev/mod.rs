//! Weighted Sobolev embeddings on model manifolds.
//!
//! The embedding functional B(r) decides continuity and compactness of
//! D^{1,2}_rad ↪ L^p; truncated Rayleigh quotients are minimized by finite elements.

mod embedding;
mod rayleigh;

pub use embedding::{embedding_report, ko_functional, EmbeddingReport, Verdict};
pub use rayleigh::{
    compare_i_alpha, linear_then_power, quotient_limit_scan, rayleigh_minimize, rayleigh_minimize_weight,
    rayleigh_with_error, write_scan_csv, Comparison, QuotientResult, RayleighOptions, ScanReport, ScanRow,
};
