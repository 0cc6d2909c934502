//! Semi-supervised fake news detection with event-level credibility
//! filtering.
//!
//! A text characterizer scores every news; scores are averaged per event,
//! smoothed over training updates by a scalar Kalman filter and blended back
//! into each news's credibility. The blend drives pseudo-labels for unlabeled
//! news, of which a growing, entropy-ranked share joins the training set.

pub mod annotator;
pub mod characterizer;
pub mod clusterer;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod kalman;
pub mod pipeline;
pub mod selector;
pub mod synthgen;
pub mod text;

pub use corpus::{Dataset, Label, NewsItem, Split};
pub use error::{Error, Result};
pub use eval::RunReport;
pub use pipeline::{Mode, Pipeline, PipelineConfig};
