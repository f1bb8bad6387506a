//! Entity polarization features, data-driven threshold selection and a
//! from-scratch classifier suite for two-stage misinformation analysis:
//! first flag topics likely to become fake-news targets, then use those
//! flags alongside post-level features to classify posts.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: JSONL ingestion, validation, entity and post samples.
//! - [`features`]: per-entity polarization measures and insight analyses.
//! - [`thresholds`]: exceedance curves, polynomial fits, inflection points.
//! - [`classifiers`]: LIN, LOG, SVM, KNN, NN and DT behind one contract.
//! - [`eval`]: metrics, ROC AUC, resampling and stepwise selection.
//! - [`earlywarning`]: entity-level benchmark and disputed predictions.
//! - [`fakenews`]: post-level feature extraction and experiments.
//! - [`synth`]: seeded synthetic corpora with planted ground truth.
//! - [`pipeline`]: end-to-end orchestration with rerunnable manifests.

pub mod classifiers;
pub mod corpus;
pub mod earlywarning;
pub mod error;
pub mod eval;
pub mod fakenews;
pub mod features;
pub mod linalg;
pub mod pipeline;
pub mod stats;
pub mod svg;
pub mod synth;
pub mod thresholds;

pub use classifiers::{Algorithm, Dataset, ModelSpec, TrainedModel};
pub use corpus::{Corpus, CorpusPaths, EntitySample, PostSample, SampleName};
pub use error::{Error, Result};
pub use eval::{MetricsReport, Protocol};
pub use features::EntityFeatures;
pub use thresholds::{ExceedanceCurve, PolynomialFit, SelectionPolicy, ThresholdResult};
