//! Unsupervised, frame-by-frame dynamic multi-process fusion for visual place
//! recognition over precomputed similarity data.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`] and [`vector`]: domain types and per-vector normalization.
//! - [`ingest`]: matrix files, descriptor similarity, ground truth.
//! - [`fusion`]: ratio scoring, exhaustive subset search, weighted matching.
//! - [`engine`]: the strategy registry, Dyn-MPF and its baselines.
//! - [`eval`]: Recall@K, aliasing histograms, calibration sweeps.
//! - [`synth`]: seeded benchmark generator.

pub mod engine;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod ingest;
pub mod synth;
pub mod types;
pub mod vector;

pub use error::{Error, Result};
pub use types::{
    FusionConfig, GroundTruth, SelectionRecord, SimilarityTensor, SimilarityVector, TechniqueId,
    TieBreak, Weighting,
};
