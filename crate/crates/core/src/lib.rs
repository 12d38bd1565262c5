//! Analysis toolkit for platform content withholding: pre/post impact
//! measurement with matched controls, and a user-level withholding classifier
//! (TwCensorNet) over pluggable tweet embeddings.
//!
//! The crate is organized around two pipelines:
//!
//! - **Impact**: [`ingest`] parses tweet archives into per-account timelines,
//!   [`impact`] compares engagement and follower metrics across pre/post
//!   windows around each withholding event and tests the paired differences
//!   with the Wilcoxon signed-rank test from [`stats`].
//! - **Classification**: [`embed`] provides 768-d text embeddings (file-backed
//!   or hash-based for tests), [`censornet`] assembles the classifier over the
//!   layer toolkit in [`nn`], and [`trainer`] runs splitting, training with
//!   early stopping, and evaluation.
//!
//! [`synth`] generates seeded synthetic datasets with known effect sizes for
//! regression tests and demos.

pub mod censornet;
pub mod embed;
pub mod impact;
pub mod ingest;
pub mod nn;
pub mod records;
pub mod stats;
pub mod synth;
pub mod trainer;
