//! Idea-density measures for dependency-parsed speech transcripts.
//!
//! The crate scores CoNLL-U transcripts with proposition densities (DEPID and
//! its variants, plus a POS-count baseline), computes embedding-based semantic
//! idea density and cluster features, compares groups with rank statistics and
//! evaluates features with a cross-validated elastic-net classifier.

pub mod classify;
pub mod cli;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod features;
pub mod par;
pub mod pid;
pub mod report;
pub mod seed;
pub mod sid;
pub mod specificity;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

/// Version of the report and model file formats.
pub const FORMAT_VERSION: u32 = 1;
