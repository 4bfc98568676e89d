//! Streaming hate-speech detection and moderation for Vietnamese
//! social-media comments.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`normalize`]: Phase-1 cleaning (case, links, whitespace, Unicode,
//!   repeated letters, tone-mark placement)
//! - [`segment`]: Phase-2 word segmentation, teencode expansion and stopword removal
//! - [`augment`]: EDA augmentation and label balancing
//! - [`embed`]: static embedding tables and sidecar contextual embeddings
//! - [`textcnn`]: the four-branch convolutional classifier
//! - [`baseline`]: TF-IDF + multinomial Naive Bayes
//! - [`dataset`]: CSV corpus loader
//! - [`metrics`]: confusion matrices, macro scores, k-fold splits
//! - [`pipeline`]: the end-to-end predict path shared by batch and streaming use
//! - [`stream`]: micro-batch streaming engine with sources and sinks
//! - [`gateway`]: HTTP moderation API
//! - [`synth`]: seeded synthetic comments for demos and benchmarks
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod augment;
pub mod baseline;
pub mod cli;
pub mod dataset;
pub mod embed;
pub mod error;
pub mod gateway;
pub mod label;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod segment;
pub mod stream;
pub mod synth;
pub mod textcnn;

pub use label::{Label, LabelCounts};
