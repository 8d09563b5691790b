//! Liquidity features from trade-and-quote tapes and next-minute direction
//! classifiers.
//!
//! The pipeline runs tape -> session filter -> one-minute buckets ->
//! liquidity metrics -> labeled, split, standardized dataset -> models ->
//! evaluation. [`pipeline::build_features`] covers the first half,
//! [`dataset::split`] and [`models::ModelSpec::fit`] the rest.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::unnecessary_map_or)]

pub mod artifact;
pub mod dataset;
pub mod eval;
pub mod liquidity;
pub mod models;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod tickdata;

pub use dataset::{
    Direction, LabeledRow, Part, Samples, SplitDataset, SplitFractions, SplitMode, Standardizer,
};
pub use eval::{accuracy, accuracy_percent, confusion, ConfusionMatrix, Strategy};
pub use liquidity::{FeatureRecord, FeatureVector, Metric, METRIC_COUNT};
pub use models::{Model, ModelDocument, ModelKind, ModelSpec};
pub use pipeline::{build_features, FeatureTable};
pub use rng::{derive_seed, StreamRng};
pub use sampler::MinuteBucket;
pub use synth::{SynthConfig, PlantCheck};
pub use tickdata::{SessionWindow, TickEvent, TickRecord};
pub use chrono_tz::Tz;
