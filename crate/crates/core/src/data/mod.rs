//! Labeled embeddings, class splits, file formats and episode sampling.

mod episode;
pub mod io;
mod synth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use episode::{sample_episode, sample_large_scale, Episode, EpisodeConfig};
pub use synth::{generate_synthetic, inject_outliers};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::ClassId;

/// Embeddings paired with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    pub embeddings: EmbeddingMatrix,
    pub labels: Vec<ClassId>,
}

impl LabeledEmbeddings {
    pub fn new(embeddings: EmbeddingMatrix, labels: Vec<ClassId>) -> Result<Self> {
        if embeddings.rows() != labels.len() {
            return Err(Error::Shape(format!("{} labels for {} embedding rows", labels.len(), embeddings.rows())));
        }
        Ok(Self { embeddings, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self { embeddings: self.embeddings.select(indices), labels: indices.iter().map(|&i| self.labels[i]).collect() }
    }

    pub fn classes(&self) -> BTreeSet<ClassId> {
        self.labels.iter().copied().collect()
    }
}

/// Disjoint base (training) and novel (test) class sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub base: BTreeSet<ClassId>,
    pub novel: BTreeSet<ClassId>,
}

impl SplitManifest {
    pub fn new(base: BTreeSet<ClassId>, novel: BTreeSet<ClassId>) -> Result<Self> {
        let split = Self { base, novel };
        split.validate()?;
        Ok(split)
    }

    pub fn validate(&self) -> Result<()> {
        match self.base.intersection(&self.novel).next() {
            Some(&class) => Err(Error::OverlappingSplit { class }),
            None => Ok(()),
        }
    }
}
