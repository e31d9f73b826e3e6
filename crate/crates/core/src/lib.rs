//! Learning-curve harness for fine-tuned tweet classifiers.
//!
//! The pipeline: ingest and deduplicate labeled pools ([`corpus`]), fix a
//! seeded k-fold plan with nested training subsamples ([`folds`]), train
//! and predict through a [`backend`], score with binary- or micro-F1
//! ([`metrics`]), fuse fold models by majority vote ([`ensemble`]), and
//! orchestrate/persist whole curves with optional cross-task warm starts
//! ([`runner`]). [`report`] renders curve tables and SVG figures.

pub mod backend;
pub mod cmd;
pub mod corpus;
pub mod ensemble;
pub mod error;
pub mod fingerprint;
pub mod folds;
pub mod metrics;
pub mod predictions;
pub mod report;
pub mod rng;
pub mod runner;
pub mod schema;
pub mod synth;

pub use error::{Error, Result};
