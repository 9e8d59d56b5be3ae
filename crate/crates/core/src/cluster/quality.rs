//! External (purity, pairwise F-measure, Rand index) and internal (silhouette)
//! clustering quality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ClusterError, DistanceMatrix, FlatClustering};
use crate::ingest::EmailId;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub purity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f_measure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rand_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub silhouette: Option<f64>,
}

fn choose2(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Compares `pred` with `gold` over their shared id universe, which must be identical.
pub fn quality(pred: &FlatClustering, gold: &FlatClustering) -> Result<QualityReport, ClusterError> {
    let pred_ids: Vec<EmailId> = pred.assignments.keys().copied().collect();
    let gold_ids: Vec<EmailId> = gold.assignments.keys().copied().collect();
    if pred_ids != gold_ids {
        return Err(ClusterError::IdUniverseMismatch);
    }
    let n = pred_ids.len() as u64;
    let mut contingency: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut pred_sizes: BTreeMap<usize, u64> = BTreeMap::new();
    let mut gold_sizes: BTreeMap<usize, u64> = BTreeMap::new();
    for id in &pred_ids {
        let (p, g) = (pred.assignments[id], gold.assignments[id]);
        *contingency.entry((p, g)).or_default() += 1;
        *pred_sizes.entry(p).or_default() += 1;
        *gold_sizes.entry(g).or_default() += 1;
    }

    let mut best_overlap: BTreeMap<usize, u64> = BTreeMap::new();
    for (&(p, _), &count) in &contingency {
        let best = best_overlap.entry(p).or_default();
        *best = (*best).max(count);
    }
    let purity = if n == 0 { 1.0 } else { best_overlap.values().sum::<u64>() as f64 / n as f64 };

    let together_both: u64 = contingency.values().map(|&c| choose2(c)).sum();
    let together_pred: u64 = pred_sizes.values().map(|&c| choose2(c)).sum();
    let together_gold: u64 = gold_sizes.values().map(|&c| choose2(c)).sum();
    let total = choose2(n);
    let tp = together_both;
    let fp = together_pred - tp;
    let fn_ = together_gold - tp;
    let tn = total - tp - fp - fn_;

    let rand_index = if total == 0 { 1.0 } else { (tp + tn) as f64 / total as f64 };
    let f_measure = pairwise_f1(tp, fp, fn_);

    Ok(QualityReport { purity: Some(purity), f_measure: Some(f_measure), rand_index: Some(rand_index), silhouette: None })
}

/// Pairwise F1; both partitions putting no pairs together counts as perfect agreement.
pub fn pairwise_f1(tp: u64, fp: u64, fn_: u64) -> f64 {
    if fp == 0 && fn_ == 0 {
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean silhouette over all points; singletons score 0, and a single
/// cluster scores 0 overall.
pub fn silhouette(clustering: &FlatClustering, pairwise: &DistanceMatrix) -> Result<f64, ClusterError> {
    let n = pairwise.len();
    let labels: Vec<usize> = pairwise
        .ids
        .iter()
        .map(|id| clustering.assignments.get(id).copied().ok_or(ClusterError::IdUniverseMismatch))
        .collect::<Result<_, _>>()?;
    if clustering.assignments.len() != n {
        return Err(ClusterError::IdUniverseMismatch);
    }
    let k = clustering.k;
    if n == 0 || k < 2 {
        return Ok(0.0);
    }
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    let mut total = 0.0;
    for i in 0..n {
        if sizes[labels[i]] <= 1 {
            continue;
        }
        let mut sums = vec![0.0; k];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += pairwise.get(i, j);
            }
        }
        let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != labels[i] && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok((total / n as f64).clamp(-1.0, 1.0))
}

/// Member minimizing the summed distance to the other members; ties go to the smallest id.
pub fn medoid(cluster: &[EmailId], pairwise: &DistanceMatrix) -> Result<EmailId, ClusterError> {
    if cluster.is_empty() {
        return Err(ClusterError::Empty);
    }
    let positions: Vec<(EmailId, usize)> = cluster
        .iter()
        .map(|&id| pairwise.position(id).map(|p| (id, p)).ok_or(ClusterError::UnknownId(id)))
        .collect::<Result<_, _>>()?;
    let mut best: Option<(f64, EmailId)> = None;
    for &(id, p) in &positions {
        let sum: f64 = positions.iter().map(|&(_, q)| pairwise.get(p, q)).sum();
        best = match best {
            Some((bs, bid)) if super::agglomerative::is_tie(sum, bs) => Some((bs, bid.min(id))),
            Some((bs, _)) if bs < sum => best,
            _ => Some((sum, id)),
        };
    }
    Ok(best.unwrap().1)
}
