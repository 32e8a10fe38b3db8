//! Discrete relation constraints for relation extraction, end to end:
//! mine type and cardinality constraint sets from a knowledge-base triple
//! store, encode them in two binary forms, score batches of predictions
//! with differentiable constraint losses (with analytic gradients), train
//! a small softmax classifier regularized by that loss, and audit or
//! repair prediction sets that contradict the constraints.
//!
//! The crate is organized along the pipeline:
//!
//! * [`kb`] — triples, vocabulary, indexed store
//! * [`mining`] — the five constraint sets and their miners
//! * [`encoding`] — Coherent (one vector per set) and Semantic (one vector
//!   per rule) binary encodings
//! * [`indicators`] — entity-equality gates for instance pairs
//! * [`loss`] — local loss kernels, batch aggregation, gradients, and a
//!   finite-difference check
//! * [`synth`] — seeded synthetic benchmark with planted constraints
//! * [`train`] — linear softmax classifier with the λ-weighted total loss
//! * [`infer`] — violation counting and constraint-satisfying repair
//! * [`io`] — line-delimited file formats used by the CLI
//! * [`randgen`] — seeded generators for self-checks

pub mod encoding;
pub mod error;
pub mod indicators;
pub mod infer;
pub mod io;
pub mod kb;
pub mod loss;
pub mod mining;
pub mod randgen;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
