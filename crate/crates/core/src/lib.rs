//! Traffic-jam classification pipeline: event ingestion, a seeded synthetic
//! event generator, histogram tree ensembles with worker-invariant training,
//! and evaluation metrics.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below name the common instantiations.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod event_model;
pub mod ingest;
pub mod parallel;
pub mod scalar;
pub mod trees;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureMatrix32 = ingest::FeatureMatrix<f32>;
pub type FeatureMatrix64 = ingest::FeatureMatrix<f64>;
pub type Ensemble32 = trees::Ensemble<f32>;
pub type Ensemble64 = trees::Ensemble<f64>;
