//! Lloyd's k-means with caller-supplied initial centroids.

use serde::{Deserialize, Serialize};

use super::{ClusterError, FlatClustering};
use crate::ingest::EmailId;

pub trait VectorDistance {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl VectorDistance for Euclidean {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub initial_centroids: Vec<Vec<f64>>,
    pub max_iterations: usize,
    pub convergence_epsilon: f64,
}

impl KMeansConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 100;
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    pub fn new(initial_centroids: Vec<Vec<f64>>) -> Self {
        Self {
            k: initial_centroids.len(),
            initial_centroids,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            convergence_epsilon: Self::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub clustering: FlatClustering,
    /// Cluster index per input vector (same numbering as `centroids`).
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Sum of squared distances to the assigned centroid, after the initial
    /// assignment and after every iteration.
    pub objective_trace: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &[Vec<f64>], dist: &dyn VectorDistance) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = dist.distance(x, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn objective(vectors: &[Vec<f64>], assignment: &[usize], centroids: &[Vec<f64>], dist: &dyn VectorDistance) -> f64 {
    vectors.iter().zip(assignment).map(|(x, &c)| dist.distance(x, &centroids[c]).powi(2)).sum()
}

/// Cluster `c` is stored as index `c` of the returned centroids. Empty clusters
/// are reseeded with the point farthest from its current centroid (taken from a
/// cluster that keeps at least one member).
pub fn kmeans(
    ids: &[EmailId],
    vectors: &[Vec<f64>],
    cfg: &KMeansConfig,
    dist: &dyn VectorDistance,
) -> Result<KMeansResult, ClusterError> {
    let n = vectors.len();
    if ids.len() != n {
        return Err(ClusterError::InvalidMatrix("ids and vectors differ in length".into()));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(ClusterError::InvalidK { k: cfg.k, n });
    }
    if cfg.initial_centroids.len() != cfg.k {
        return Err(ClusterError::InvalidSpec(format!(
            "{} initial centroids for k = {}",
            cfg.initial_centroids.len(),
            cfg.k
        )));
    }
    if cfg.max_iterations == 0 || !(cfg.convergence_epsilon > 0.0) {
        return Err(ClusterError::InvalidSpec("max_iterations >= 1 and epsilon > 0 required".into()));
    }
    let dim = vectors[0].len();
    if vectors.iter().chain(&cfg.initial_centroids).any(|v| v.len() != dim) {
        return Err(ClusterError::VocabularyMismatch { left: dim, right: 0 });
    }

    let mut centroids = cfg.initial_centroids.clone();
    let mut assignment: Vec<usize> = vectors.iter().map(|x| nearest(x, &centroids, dist).0).collect();
    let mut trace = vec![objective(vectors, &assignment, &centroids, dist)];
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        repair_empty(vectors, &mut assignment, &mut centroids, dist);
        let updated = means(vectors, &assignment, cfg.k, dim);
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| dist.distance(a, b))
            .fold(0.0, f64::max);
        centroids = updated;
        let next: Vec<usize> = vectors.iter().map(|x| nearest(x, &centroids, dist).0).collect();
        let changed = next != assignment;
        assignment = next;
        trace.push(objective(vectors, &assignment, &centroids, dist));
        if !changed || shift < cfg.convergence_epsilon {
            break;
        }
    }
    repair_empty(vectors, &mut assignment, &mut centroids, dist);

    Ok(KMeansResult {
        clustering: FlatClustering::from_fixed_labels(ids, &assignment, cfg.k),
        assignment,
        centroids,
        iterations,
        objective_trace: trace,
    })
}

fn means(vectors: &[Vec<f64>], assignment: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (x, &c) in vectors.iter().zip(assignment) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x) {
            *s += v;
        }
    }
    for (sum, count) in sums.iter_mut().zip(counts) {
        if count > 0 {
            sum.iter_mut().for_each(|s| *s /= count as f64);
        }
    }
    sums
}

fn repair_empty(vectors: &[Vec<f64>], assignment: &mut [usize], centroids: &mut [Vec<f64>], dist: &dyn VectorDistance) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assignment.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else { return };
        let farthest = (0..vectors.len())
            .filter(|&i| counts[assignment[i]] > 1)
            .map(|i| (i, dist.distance(&vectors[i], &centroids[assignment[i]])))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        let Some((i, _)) = farthest else { return };
        assignment[i] = empty;
        centroids[empty] = vectors[i].clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(n: usize) -> Vec<EmailId> {
        (1..=n as EmailId).collect()
    }

    #[test]
    fn k_equals_n_converges_in_one_iteration() {
        let vectors = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        let r = kmeans(&ids(3), &vectors, &KMeansConfig::new(vectors.clone()), &Euclidean).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.assignment, vec![0, 1, 2]);
        assert_eq!(r.clustering.k, 3);
    }

    #[test]
    fn k_one_centroid_is_mean() {
        let vectors = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![4.0, 6.0]];
        let r = kmeans(&ids(3), &vectors, &KMeansConfig::new(vec![vec![9.0, 9.0]]), &Euclidean).unwrap();
        assert_eq!(r.clustering.k, 1);
        assert!((r.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_n_is_error() {
        let vectors = vec![vec![0.0]];
        let cfg = KMeansConfig::new(vec![vec![0.0], vec![1.0]]);
        assert!(matches!(kmeans(&ids(1), &vectors, &cfg, &Euclidean), Err(ClusterError::InvalidK { .. })));
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // Second centroid is far from everything and starts empty.
        let vectors = vec![vec![0.0], vec![0.1], vec![10.0]];
        let cfg = KMeansConfig::new(vec![vec![0.0], vec![100.0]]);
        let r = kmeans(&ids(3), &vectors, &cfg, &Euclidean).unwrap();
        assert_eq!(r.clustering.k, 2);
        let groups = r.clustering.clusters();
        assert!(groups.iter().all(|g| !g.is_empty()));
        assert!(groups.contains(&vec![3]));
    }

    proptest! {
        #[test]
        fn objective_non_increasing(
            points in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..20),
            k_frac in 0.0f64..1.0,
        ) {
            let k = 1 + ((points.len() - 1) as f64 * k_frac) as usize;
            let init: Vec<Vec<f64>> = points.iter().rev().take(k).cloned().collect();
            let r = kmeans(&ids(points.len()), &points, &KMeansConfig::new(init), &Euclidean).unwrap();
            for w in r.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }
}
