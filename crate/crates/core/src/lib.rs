//! Story-point estimation from fused text, image and severity features.
//!
//! The crate is organised along the pipeline:
//!
//! - [`dataset`]: the records file, severity and story-point encodings, and
//!   the seeded stratified split.
//! - [`fusion`]: joins records with their embedding vectors into a
//!   [`fusion::FeatureMatrix`], z-score normalisation and the mean-of-embedding
//!   correlation analysis.
//! - [`gbt`]: second-order gradient-boosted trees with a softmax multiclass
//!   objective, exact split search and early stopping.
//! - [`eval`]: confusion matrices, per-class precision/recall/F1, near-miss
//!   accuracy and the paired with/without-severity comparison.
//! - [`pipeline`]: the end-to-end train/evaluate/ablate wiring shared by the
//!   command line tool and the browser demo.
//! - [`synth`]: a seeded synthetic corpus generator for demos and tests.

pub mod dataset;
pub mod eval;
pub mod fusion;
pub mod gbt;
pub mod pipeline;
pub mod synth;

mod error;

pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
