//! Discrete Bayesian networks over financial time series.
//!
//! The crate covers the full pipeline from raw CSV series to causal
//! reports: ingestion and alignment, discretisation into labelled states,
//! structure learning (score-based hill climbing or the constraint-based PC
//! algorithm), CPT estimation (maximum likelihood or EM under missing
//! data), exact inference, cross-validated model selection over a grid of
//! discretisation choices, and parameter sensitivity analysis.
//!
//! The mdbook under `book/` walks through every stage with runnable
//! examples; those snippets double as doc-tests.

pub mod discretize;
pub mod graph;
pub mod infer;
pub mod ingest;
pub mod learn;
pub mod seed;
