//! Budget-aware human-in-the-loop annotation of video object masks,
//! simulated end to end on a synthetic raster world.
//!
//! The crate is organised along the annotation loop:
//!
//! - [`synthworld`] generates videos with ground-truth object tracks,
//! - [`propagation`] turns annotated keyframes into per-frame masks,
//! - [`selection`] decides *which* frame to annotate next (quality network
//!   embeddings plus farthest-point selection, and baselines),
//! - [`policy`] decides *how* to annotate it (PPO actor-critic, baselines)
//!   and ranks videos within a collection,
//! - [`annotator`] simulates the human and the annotation-to-mask model,
//! - [`metrics`] scores masks, and
//! - [`harness`] runs sessions, collections and whole experiment matrices.
//!
//! [`learncore`] holds the small dense-network library the learned
//! components share.

pub mod annotator;
pub mod error;
pub mod harness;
pub mod learncore;
pub mod mask;
pub mod metrics;
pub mod policy;
pub mod propagation;
pub mod rng;
pub mod selection;
pub mod synthworld;

pub use annotator::{AnnotationType, AnnotatorModel, Click, CostModel, Polarity};
pub use error::{Error, Result};
pub use mask::Mask;
pub use metrics::{Curve, QualityBin};
pub use propagation::{AnnotatedSet, PropagationParams, Provenance};
pub use synthworld::{ShapeKind, Video, WorldConfig};
