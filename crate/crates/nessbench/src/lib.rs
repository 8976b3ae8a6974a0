//! Link-prediction benchmark toolkit built around graph autoencoders.
//!
//! The training graph is partitioned into static, edge-disjoint subgraphs;
//! a parameter-shared encoder learns from every subgraph, and at test time
//! the per-subgraph embeddings are aggregated into one joint embedding.
//! Baseline regimes (full-graph, dynamically sampled, dynamically
//! partitioned) run through the same pipeline for comparison, together with
//! an analysis suite over the learned subgraph embeddings.

pub mod cli;
pub mod data;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod graph;
pub mod loss;
pub mod rng;
pub mod split;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
