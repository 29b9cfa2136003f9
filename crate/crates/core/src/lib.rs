//! Scam-contract detection over Ethereum transaction graphs.
//!
//! The pipeline turns raw transfer records into a directed weighted graph,
//! computes a 13-dimension topology feature vector per address, moves the
//! features of externally owned accounts onto the contracts they touch,
//! rebalances the labels and trains two classifiers (an MLP on the contract
//! features alone and a GCN over the shared-EOA contract graph).
//!
//! Stages:
//!
//! - [`ingest`]: CSV parsing, graph construction, degree pruning.
//! - [`topo`]: per-node topology features and z-score normalization.
//! - [`contractize`]: EOA-neighborhood aggregation and the contract graph.
//! - [`balance`]: SMOTE, ENN and minority-centered subgraph sampling.
//! - [`nn`]: MLP/GCN forward and backward passes, Adam, training loops.
//! - [`eval`]: stratified splits, metrics, first-layer contribution analysis, reports.
//! - [`synth`]: seeded synthetic transaction worlds with planted scam motifs.
//! - [`pipeline`]: configuration, stage orchestration and manifests.

pub mod balance;
pub mod contractize;
pub mod eval;
pub mod ingest;
pub mod matrix;
pub mod nn;
pub mod pipeline;
pub mod synth;
pub mod topo;

pub use ingest::{Address, NodeKind, TxGraph, TxRecord};
pub use matrix::Matrix;
