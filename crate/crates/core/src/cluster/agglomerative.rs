//! Bottom-up hierarchical clustering over a precomputed distance matrix.
//!
//! Node numbering follows the usual convention: leaves are `0..n`, the
//! `i`-th merge creates node `n + i`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClusterError, DistanceMatrix, FlatClustering};
use crate::ingest::EmailId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    Single,
    #[default]
    Complete,
    Average,
}

impl Linkage {
    pub const ALL: [Linkage; 3] = [Linkage::Single, Linkage::Complete, Linkage::Average];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub leaves: Vec<EmailId>,
    pub merges: Vec<Merge>,
    pub linkage: Linkage,
}

/// Where to cut a dendrogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutTarget {
    K(usize),
    Height(f64),
}

/// Two distances within this relative tolerance count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

pub fn is_tie(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs())
}

struct Active {
    node: usize,
    size: usize,
    min_id: EmailId,
}

/// At every step the pair of clusters at minimal linkage distance merges; among
/// tied pairs the lexicographically smallest (min id, min id) pair wins, where a
/// cluster's id is its smallest member email id.
pub fn agglomerative(pairwise: &DistanceMatrix, linkage: Linkage) -> Result<Dendrogram, ClusterError> {
    let n = pairwise.len();
    if n == 0 {
        return Err(ClusterError::Empty);
    }
    let mut dist: Vec<f64> = (0..n * n).map(|k| pairwise.get(k / n, k % n)).collect();
    let mut slots: Vec<Option<Active>> = pairwise
        .ids
        .iter()
        .enumerate()
        .map(|(i, &id)| Some(Active { node: i, size: 1, min_id: id }))
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let mut best: Option<(f64, (EmailId, EmailId), usize, usize)> = None;
        for i in 0..n {
            let Some(a) = &slots[i] else { continue };
            for j in (i + 1)..n {
                let Some(b) = &slots[j] else { continue };
                let d = dist[i * n + j];
                let key = (a.min_id.min(b.min_id), a.min_id.max(b.min_id));
                let better = match best {
                    None => true,
                    Some((bd, bkey, _, _)) => {
                        if is_tie(d, bd) {
                            key < bkey
                        } else {
                            d < bd
                        }
                    }
                };
                if better {
                    best = Some((d, key, i, j));
                }
            }
        }
        let (height, _, i, j) = best.expect("at least two active clusters");
        let a = slots[i].take().unwrap();
        let b = slots[j].take().unwrap();
        for k in 0..n {
            if slots[k].is_none() {
                continue;
            }
            let (dik, djk) = (dist[i * n + k], dist[j * n + k]);
            let updated = match linkage {
                Linkage::Single => dik.min(djk),
                Linkage::Complete => dik.max(djk),
                Linkage::Average => (a.size as f64 * dik + b.size as f64 * djk) / (a.size + b.size) as f64,
            };
            dist[i * n + k] = updated;
            dist[k * n + i] = updated;
        }
        let (left, right) = if a.min_id <= b.min_id { (a.node, b.node) } else { (b.node, a.node) };
        merges.push(Merge { left, right, height, size: a.size + b.size });
        slots[i] = Some(Active { node: n + step, size: a.size + b.size, min_id: a.min_id.min(b.min_id) });
    }

    Ok(Dendrogram { leaves: pairwise.ids.clone(), merges, linkage })
}

/// Tree form served to the labeling UI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode {
    pub node: usize,
    pub height: f64,
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub email_id: Option<EmailId>,
    pub children: Vec<DendrogramNode>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.merges.iter().map(|m| m.height).collect()
    }

    pub fn cut(&self, target: CutTarget) -> Result<FlatClustering, ClusterError> {
        match target {
            CutTarget::K(k) => self.cut_k(k),
            CutTarget::Height(h) => self.cut_height(h),
        }
    }

    /// Undoes the last `k - 1` merges.
    pub fn cut_k(&self, k: usize) -> Result<FlatClustering, ClusterError> {
        let n = self.n_leaves();
        if k == 0 || k > n {
            return Err(ClusterError::InvalidK { k, n });
        }
        Ok(self.apply_merges(n - k))
    }

    /// Keeps the merges with height <= `h`.
    pub fn cut_height(&self, h: f64) -> Result<FlatClustering, ClusterError> {
        if !(h >= 0.0) {
            return Err(ClusterError::InvalidHeight(h));
        }
        let count = self.merges.iter().take_while(|m| m.height <= h).count();
        Ok(self.apply_merges(count))
    }

    fn apply_merges(&self, count: usize) -> FlatClustering {
        let n = self.n_leaves();
        let mut parent: Vec<usize> = (0..2 * n).collect();
        for (step, merge) in self.merges.iter().take(count).enumerate() {
            parent[merge.left] = n + step;
            parent[merge.right] = n + step;
        }
        let root = |mut x: usize| {
            while parent[x] != x {
                x = parent[x];
            }
            x
        };
        let roots: Vec<usize> = (0..n).map(root).collect();
        FlatClustering::from_labels(&self.leaves, &roots)
    }

    pub fn to_tree(&self) -> DendrogramNode {
        let n = self.n_leaves();
        let root = if n <= 1 { 0 } else { n + self.merges.len() - 1 };
        self.subtree(root)
    }

    fn subtree(&self, node: usize) -> DendrogramNode {
        let n = self.n_leaves();
        if node < n {
            return DendrogramNode { node, height: 0.0, size: 1, email_id: Some(self.leaves[node]), children: Vec::new() };
        }
        let merge = &self.merges[node - n];
        DendrogramNode {
            node,
            height: merge.height,
            size: merge.size,
            email_id: None,
            children: vec![self.subtree(merge.left), self.subtree(merge.right)],
        }
    }
}

/// Groups of leaves by cluster, keyed by the cluster's smallest email id.
pub fn groups_by_min_id(clustering: &FlatClustering) -> BTreeMap<EmailId, Vec<EmailId>> {
    clustering.clusters().into_iter().map(|members| (members[0], members)).collect()
}
