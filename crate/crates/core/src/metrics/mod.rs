//! Pairwise classification metrics, clustering diagnostics and reports.

pub mod classification;
pub mod cluster;
pub mod diagnostics;
pub mod report;
pub mod retrieval;

pub use classification::{auc, best_threshold, pairwise_metrics, Confusion, PairwiseMetrics};
pub use cluster::{ari, ari_agg, ari_cc, average_linkage, ScoreMatrix};
pub use diagnostics::{diagnose, plan_batches, Diagnostics, DiagnosticsPlan};
pub use report::{aggregate_runs, combine_modes, write_summary_csv, EvalReport};
pub use retrieval::p_r_at_k;
