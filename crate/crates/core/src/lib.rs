//! Turns bearing vibration recordings into text corpora for fine-tuning and
//! evaluating chat LLMs as fault classifiers.
//!
//! The pipeline: [`signal_io`] reads recordings (or [`synth`] fabricates
//! them), [`preprocess`] cuts segments and encodes their FFT magnitudes as
//! integer strings, [`features`] summarizes segments with 15 statistics,
//! [`promptgen`] wraps either encoding in instruction prompts and writes
//! JSONL corpora, [`splits`] reproduces the train/eval protocols,
//! [`llm_client`] queries a served model and [`evalkit`] scores the answers.
//! [`baselines`] holds small nearest-neighbour classifiers used to check that
//! the encodings carry class information.

pub mod baselines;
pub mod evalkit;
pub mod features;
pub mod format;
pub mod llm_client;
pub mod preprocess;
pub mod promptgen;
pub mod signal;
pub mod signal_io;
pub mod splits;
pub mod synth;

pub use features::{FeatureVector, FEATURE_NAMES};
pub use preprocess::{EncodedSample, Segment, SegmentMode, SpectrumVector};
pub use promptgen::{Label, PromptRecord, Scheme, Track};
pub use signal::{FaultAnnotation, FaultKind, FaultSize, OperatingCondition, SensorPosition, TimeSeriesSignal};

/// Version of the core library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
