//! Preference-aligned code community question answering at desk scale.
//!
//! The crate covers the whole pipeline:
//!
//! ```text
//! Posts.xml ─► dump ─► corpus ─► scoring ─► ranking ─► train (SFT, then listwise)
//!                                              │
//!                                              └─► retrieval ─► generate ─► metrics
//! ```
//!
//! Every stage reads and writes line-delimited JSON; stages can be run
//! independently from the `ccqa` binary (see [`cli`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod corpus;
pub mod dump;
pub mod error;
pub mod jsonl;
pub mod lm;
pub mod metrics;
pub mod ranking;
pub mod retrieval;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod tokenize;
pub mod train;

pub use error::{Error, Result};
