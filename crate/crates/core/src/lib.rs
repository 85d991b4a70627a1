//! Clustering-free building instance segmentation for urban-scale point clouds.
//!
//! The crate is organized around a block-at-a-time pipeline: a scene is
//! cropped into [`partition::Block`]s, a [`features::FeatureProvider`]
//! supplies per-point semantic predictions, center offsets, and
//! instance-aware embeddings for each block, and [`segmenter::segment_block`]
//! groups foreground points into scored building proposals by assigning every
//! foreground point to its nearest candidate in embedding space. Candidates
//! are picked with furthest point sampling and merged through their
//! offset-shifted anchors, so no point-wise clustering pass is needed.
//!
//! Supporting modules cover mesh-to-cloud sampling ([`mesh`]), instance
//! segmentation metrics ([`metrics`]), scene statistics ([`stats`]), and a
//! procedural test-scene generator ([`synth`]).
//!
//! The crate is `no_std`-compatible (requires `alloc`); file formats, the
//! CLI, and parallel scene drivers live in the companion `urbanseg` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod error;
mod vec3;

pub mod features;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod segmenter;
pub mod stats;
pub mod synth;

pub use error::Error;
pub use vec3::Vec3;

/// Result alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
