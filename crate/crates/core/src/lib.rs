//! Few-shot novel category discovery over embedding vectors.
//!
//! Given a handful of labeled support embeddings and a batch of unlabeled
//! queries, the clustering routines here either assign each query to one of
//! the support classes or group it into a newly discovered cluster:
//!
//! - [`shc`]: semi-supervised average-linkage agglomeration that halts when two
//!   prototype-bearing clusters would merge.
//! - [`ukc`]: iterated Lloyd k-means whose cluster count grows through
//!   prototype-collision and size-based splits.
//! - [`scalable`]: subsample, cluster, then assign everything else to the
//!   nearest discovered cluster.
//!
//! [`eval`] holds the Hungarian-matched accuracy protocol and the episode runner,
//! [`data`] the file formats, synthetic generator and episodic sampler, and
//! [`repr`] the supervised contrastive loss with its analytic gradient.

pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod repr;
pub mod rng;
pub mod scalable;
pub mod shc;
pub mod ukc;

pub use embedding::{class_prototypes, pairwise_distance, DistanceMatrix, EmbeddingMatrix, Metric, PrototypeSet};
pub use error::{Error, Result};

/// Identifier of a ground-truth or support class.
pub type ClassId = u32;
