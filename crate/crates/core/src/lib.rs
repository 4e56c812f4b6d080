//! Community detection and the graph-mining tasks downstream of it.
//!
//! The crate is organised around one question: when a pipeline swaps its
//! community detection method, how much does downstream task quality move?
//! To answer it we provide
//!
//! * a shared sparse [`graph::Graph`] substrate with deterministic loading,
//! * five detection methods behind one [`communities::Cover`] type
//!   (Louvain, label propagation, spectral, ego-splitting, BIGCLAM),
//! * community-aware centrality and propensity scores ([`centrality`]),
//! * three downstream tasks: rating prediction ([`recsys`]), trust
//!   prediction ([`trust`]) and node anomaly classification ([`anomaly`]),
//! * shared evaluation metrics ([`metrics`]) and an experiment [`runner`]
//!   that sweeps the (algorithm x centrality x task) matrix reproducibly.
//!
//! Every randomised routine takes an explicit seed and is deterministic for
//! a fixed (input, seed, parameters) triple.

pub mod anomaly;
pub mod centrality;
pub mod communities;
pub mod error;
pub mod graph;
pub mod metrics;
pub mod recsys;
pub mod runner;
pub mod trust;

pub use error::{Error, Result};
