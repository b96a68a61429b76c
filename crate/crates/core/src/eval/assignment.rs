use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ClassId;

/// What a predicted cluster stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ClusterTag {
    /// Claimed by the prototype of a support class.
    Known(ClassId),
    /// A discovered cluster with no support prototype.
    Novel(usize),
}

impl ClusterTag {
    pub fn known_class(self) -> Option<ClassId> {
        match self {
            ClusterTag::Known(c) => Some(c),
            ClusterTag::Novel(_) => None,
        }
    }

    pub fn is_novel(self) -> bool {
        matches!(self, ClusterTag::Novel(_))
    }
}

impl fmt::Display for ClusterTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClusterTag::Known(c) => write!(f, "known:{c}"),
            ClusterTag::Novel(i) => write!(f, "novel:{i}"),
        }
    }
}

/// Partition of a query batch into tagged clusters.
///
/// Clusters may hold no queries (a support class nobody matched); they still
/// count towards [`ClusterAssignment::cluster_count`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    cluster_of: Vec<usize>,
    tags: Vec<ClusterTag>,
}

impl ClusterAssignment {
    pub fn new(cluster_of: Vec<usize>, tags: Vec<ClusterTag>) -> Result<Self> {
        if let Some(&c) = cluster_of.iter().find(|&&c| c >= tags.len()) {
            return Err(Error::Shape(format!("query assigned to cluster {c} of {}", tags.len())));
        }
        let mut known = BTreeSet::new();
        for tag in &tags {
            if let ClusterTag::Known(c) = tag {
                if !known.insert(*c) {
                    return Err(Error::InvalidParameter(format!("class {c} claimed by two clusters")));
                }
            }
        }
        Ok(Self { cluster_of, tags })
    }

    /// Cluster index of every query.
    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    pub fn tags(&self) -> &[ClusterTag] {
        &self.tags
    }

    pub fn tag_of(&self, query: usize) -> ClusterTag {
        self.tags[self.cluster_of[query]]
    }

    pub fn len(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cluster_of.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.tags.len()
    }

    pub fn novel_cluster_count(&self) -> usize {
        self.tags.iter().filter(|t| t.is_novel()).count()
    }

    /// Query indices of every cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.tags.len()];
        for (q, &c) in self.cluster_of.iter().enumerate() {
            out[c].push(q);
        }
        out
    }
}
