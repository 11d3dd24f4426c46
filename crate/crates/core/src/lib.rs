//! Representation-diversity analysis and training-set distillation.
//!
//! The library works over per-sample vector snapshots exported from model
//! training runs (one vector per training sample, tagged as `embedding` or
//! `encoder` space). It provides:
//!
//! - [`vectorstore`] — load/save/align vector snapshots (JSONL and binary).
//! - [`clustering`] — cosine/euclidean k-means and exact cosine KNN.
//! - [`model_selection`] — WCSS/Davies-Bouldin sweeps to pick the cluster count.
//! - [`projection`] — 2-component PCA for scatter export.
//! - [`flowmap`] — cluster-label flow between two representation spaces.
//! - [`distill`] — budgeted, similarity-stratified subset selection.
//! - [`corpus_metrics`] — ROUGE, abstractness, compression and corpus stats.

pub mod clustering;
pub mod corpus_metrics;
pub mod distill;
pub mod error;
pub mod flowmap;
pub mod model_selection;
pub mod projection;
pub mod vectorstore;

pub use error::{Error, Result};
