//! Distances, hierarchical clustering, k-means and clustering quality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EmailId;

pub mod agglomerative;
pub mod distance;
pub mod kmeans;
pub mod quality;

pub use agglomerative::{agglomerative, CutTarget, Dendrogram, DendrogramNode, Linkage, Merge};
pub use distance::{email_distance, email_distance_matrix, DistanceMatrix, DistanceSpec, EmailVectors, InstanceVariant};
pub use kmeans::{kmeans, Euclidean, KMeansConfig, KMeansResult, VectorDistance};
pub use quality::{medoid, quality, silhouette, QualityReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusterError {
    #[error("nothing to cluster")]
    Empty,
    #[error("k = {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("invalid cut height {0}")]
    InvalidHeight(f64),
    #[error("invalid distance spec: {0}")]
    InvalidSpec(String),
    #[error("vector dimensions differ ({left} vs {right})")]
    VocabularyMismatch { left: usize, right: usize },
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("clusterings cover different email ids")]
    IdUniverseMismatch,
    #[error("unknown email id {0}")]
    UnknownId(EmailId),
}

/// A flat partition of email ids. Cluster ids are `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FlatClustering {
    pub assignments: BTreeMap<EmailId, usize>,
    pub k: usize,
}

impl FlatClustering {
    /// Renumbers arbitrary labels densely in order of first appearance.
    pub fn from_labels<T: Ord + Copy>(ids: &[EmailId], labels: &[T]) -> Self {
        let mut dense: BTreeMap<T, usize> = BTreeMap::new();
        let mut assignments = BTreeMap::new();
        for (&id, &label) in ids.iter().zip(labels) {
            let next = dense.len();
            let cluster = *dense.entry(label).or_insert(next);
            assignments.insert(id, cluster);
        }
        Self { assignments, k: dense.len() }
    }

    /// Keeps the given cluster numbers as they are.
    pub fn from_fixed_labels(ids: &[EmailId], labels: &[usize], k: usize) -> Self {
        Self { assignments: ids.iter().copied().zip(labels.iter().copied()).collect(), k }
    }

    /// Group `i` becomes cluster `i`.
    pub fn from_groups(groups: Vec<Vec<EmailId>>) -> Self {
        let mut assignments = BTreeMap::new();
        for (c, group) in groups.iter().enumerate() {
            for &id in group {
                assignments.insert(id, c);
            }
        }
        Self { assignments, k: groups.len() }
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn cluster_of(&self, id: EmailId) -> Option<usize> {
        self.assignments.get(&id).copied()
    }

    /// Members per cluster id, each sorted ascending.
    pub fn clusters(&self) -> Vec<Vec<EmailId>> {
        let mut out = vec![Vec::new(); self.k];
        for (&id, &c) in &self.assignments {
            out[c].push(id);
        }
        out
    }

    pub fn labels(&self, ids: &[EmailId]) -> Vec<usize> {
        ids.iter().map(|id| self.assignments[id]).collect()
    }

    pub fn restrict(&self, ids: &[EmailId]) -> Self {
        let labels: Vec<usize> = ids.iter().filter_map(|id| self.assignments.get(id).copied()).collect();
        let kept: Vec<EmailId> = ids.iter().copied().filter(|id| self.assignments.contains_key(id)).collect();
        Self::from_labels(&kept, &labels)
    }
}
