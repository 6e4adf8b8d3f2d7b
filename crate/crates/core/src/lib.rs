//! Evaluation engine for open-vocabulary attribute detection benchmarks.
//!
//! The crate covers the full benchmark pipeline:
//!
//! - data model for attribute taxonomies, object categories, tri-state
//!   annotations and model predictions ([`taxonomy`], [`dataset`]),
//! - annotation-time label propagation and inter-annotator consistency
//!   ([`annotation`]),
//! - box matching protocols and IoU ([`geometry`], [`matching`]),
//! - average precision, attribute mAP with head/medium/tail splits, the
//!   chance baseline, generalized detection AP over the 80-class set,
//!   dataset statistics and subset-stability analysis ([`ap`], [`splits`],
//!   [`eval`], [`stats`]),
//! - temperature-scaled cosine matching scores, contrastive losses and a
//!   finite-difference gradient check for embedding-based baselines
//!   ([`scoring`]),
//! - rule-based decomposition of tagged captions into nouns, noun phrases
//!   and noun complements ([`parts`]).
//!
//! File formats and the batch CLI live in [`io`], [`report`] and [`cli`].

pub mod annotation;
pub mod ap;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod parts;
pub mod report;
pub mod scoring;
pub mod splits;
pub mod stats;
pub mod taxonomy;

pub use dataset::{AnnotatedImage, AnnotatedInstance, Dataset, PredictedInstance, Violation};
pub use error::{Error, Result};
pub use eval::{attribute_eval, chance_report, ovd80_eval, EvalMode, EvalReport, Ovd80Scores};
pub use geometry::BoundingBox;
pub use matching::{match_for_attributes, match_for_detection, MatchResult};
pub use splits::{frequency_splits, FrequencySplits};
pub use taxonomy::{
    AttributeDef, AttributeTaxonomy, CategoryGroup, CategorySplit, Exclusivity, ObjectCategory,
    TriState,
};
