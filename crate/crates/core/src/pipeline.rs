//! The three discovery phases: topic clustering, process instance discovery
//! and activity clustering.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{
    agglomerative, kmeans, medoid, silhouette, ClusterError, CutTarget, Dendrogram, DistanceMatrix, DistanceSpec,
    EmailVectors, Euclidean, FlatClustering, KMeansConfig, Linkage, VectorDistance,
};
use crate::ingest::{Corpus, Email, EmailId};
use crate::textprep::{BoostConfig, CleansingConfig, EmailMatrices, SparseVec, TermMatrix, TextModel, TextprepError};

pub const ENGLISH_SYNONYMS: &str = include_str!("../data/synonyms_en.tsv");

/// Largest k tried by the automatic dendrogram cut.
pub const AUTO_CUT_MAX_K: usize = 10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Text(#[from] TextprepError),
    #[error("unknown topic cluster {0}")]
    UnknownTopic(usize),
    #[error("unknown process instance {0}")]
    UnknownInstance(usize),
    #[error("instance {instance} does not belong to topic cluster {topic}")]
    SeedOutsideTopic { instance: usize, topic: usize },
    #[error("no process instances given")]
    NoInstances,
    #[error("k = {k} outside the allowed range 2..={max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("activity distance must not weight time")]
    TimeInActivitySpace,
    #[error("synonym table line {line}: {message}")]
    SynonymSyntax { line: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How a dendrogram is turned into flat clusters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutSetting {
    /// Best silhouette over k in 2..=min(10, n - 1).
    #[default]
    Auto,
    K(usize),
    Height(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCluster {
    pub cluster_id: usize,
    pub email_ids: Vec<EmailId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessInstance {
    pub instance_id: usize,
    pub topic_cluster_id: usize,
    /// Ordered by timestamp, then id.
    pub email_ids: Vec<EmailId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub average_size: f64,
    pub sizes: Vec<usize>,
    /// round(average_size), half to even, clamped to [2, total emails].
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityCluster {
    pub activity_id: usize,
    pub topic_cluster_id: usize,
    pub email_ids: Vec<EmailId>,
    pub medoid_id: EmailId,
    pub centroid: Vec<f64>,
}

/// Result of cutting one dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutResult {
    pub setting: CutSetting,
    pub k: usize,
    pub silhouette: f64,
    pub clustering: FlatClustering,
}

/// Cuts `dendrogram` (built over `pairwise`) according to `setting`.
pub fn resolve_cut(
    dendrogram: &Dendrogram,
    pairwise: &DistanceMatrix,
    setting: CutSetting,
) -> Result<CutResult, PipelineError> {
    let n = dendrogram.leaves.len();
    let clustering = match setting {
        CutSetting::K(k) => dendrogram.cut(CutTarget::K(k))?,
        CutSetting::Height(h) => dendrogram.cut(CutTarget::Height(h))?,
        CutSetting::Auto => {
            let mut best: Option<(f64, FlatClustering)> = None;
            for k in 2..=AUTO_CUT_MAX_K.min(n.saturating_sub(1)) {
                let flat = dendrogram.cut_k(k)?;
                let s = silhouette(&flat, pairwise)?;
                let better = match &best {
                    None => true,
                    Some((bs, _)) => s > *bs && !crate::cluster::agglomerative::is_tie(s, *bs),
                };
                if better {
                    best = Some((s, flat));
                }
            }
            match best {
                Some((_, flat)) => flat,
                None => dendrogram.cut_k(1)?,
            }
        }
    };
    let silhouette = silhouette(&clustering, pairwise)?;
    Ok(CutResult { setting, k: clustering.k, silhouette, clustering })
}

/// Text model, matrices and per-email vectors of one corpus.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub corpus: Corpus,
    pub model: TextModel,
    pub matrices: EmailMatrices,
    vectors: Vec<EmailVectors>,
    index: BTreeMap<EmailId, usize>,
}

impl Workspace {
    pub fn new(corpus: Corpus, cleansing: &CleansingConfig, boost: &BoostConfig) -> Result<Self, PipelineError> {
        let (model, matrices) = TextModel::fit(&corpus, cleansing, boost)?;
        let vectors = corpus
            .emails
            .iter()
            .enumerate()
            .map(|(row, e)| EmailVectors {
                id: e.id,
                subject: matrices.subject.rows[row].clone(),
                body: matrices.body.rows[row].clone(),
                timestamp: e.timestamp,
                participants: e.participants(),
            })
            .collect();
        let index = corpus.index();
        Ok(Self { corpus, model, matrices, vectors, index })
    }

    pub fn vectors(&self, id: EmailId) -> Option<&EmailVectors> {
        self.index.get(&id).map(|&i| &self.vectors[i])
    }

    pub fn email(&self, id: EmailId) -> Option<&Email> {
        self.corpus.get(id)
    }

    /// Distance matrix over `ids`, in the given order.
    pub fn distance_matrix(&self, ids: &[EmailId], spec: &DistanceSpec) -> Result<DistanceMatrix, PipelineError> {
        let subset: Vec<EmailVectors> = ids
            .iter()
            .map(|&id| self.vectors(id).cloned().ok_or(ClusterError::UnknownId(id)))
            .collect::<Result<_, _>>()?;
        Ok(crate::cluster::email_distance_matrix(&subset, spec)?)
    }

    fn by_time(&self, ids: &mut [EmailId]) {
        ids.sort_by_key(|&id| (self.corpus.get(id).map(|e| e.timestamp), id));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicPhase {
    pub spec: DistanceSpec,
    pub linkage: Linkage,
    pub dendrogram: Dendrogram,
    pub cut: CutResultSummary,
    pub clusters: Vec<TopicCluster>,
}

/// `CutResult` without the clustering, which the clusters already carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutResultSummary {
    pub setting: CutSetting,
    pub k: usize,
    pub silhouette: f64,
}

impl From<&CutResult> for CutResultSummary {
    fn from(c: &CutResult) -> Self {
        Self { setting: c.setting, k: c.k, silhouette: c.silhouette }
    }
}

/// Hierarchical clustering of the whole corpus by subject and body.
/// Cluster ids start at 1 and follow the corpus order of first appearance.
pub fn cluster_topics(
    ws: &Workspace,
    spec: &DistanceSpec,
    linkage: Linkage,
    cut: CutSetting,
) -> Result<TopicPhase, PipelineError> {
    let ids = ws.corpus.ids();
    let pairwise = ws.distance_matrix(&ids, spec)?;
    let dendrogram = agglomerative(&pairwise, linkage)?;
    let result = resolve_cut(&dendrogram, &pairwise, cut)?;
    let clusters = result
        .clustering
        .clusters()
        .into_iter()
        .enumerate()
        .map(|(c, email_ids)| TopicCluster { cluster_id: c + 1, email_ids })
        .collect();
    Ok(TopicPhase { spec: *spec, linkage, dendrogram, cut: CutResultSummary::from(&result), clusters })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicInstances {
    pub topic_cluster_id: usize,
    pub dendrogram: Dendrogram,
    pub cut: CutResultSummary,
    pub instances: Vec<ProcessInstance>,
}

/// Splits one topic cluster into process instances. Instance ids are
/// assigned from `first_id` in order of each instance's earliest email.
pub fn discover_instances(
    ws: &Workspace,
    tc: &TopicCluster,
    spec: &DistanceSpec,
    linkage: Linkage,
    cut: CutSetting,
    first_id: usize,
) -> Result<TopicInstances, PipelineError> {
    let pairwise = ws.distance_matrix(&tc.email_ids, spec)?;
    let dendrogram = agglomerative(&pairwise, linkage)?;
    let result = resolve_cut(&dendrogram, &pairwise, cut)?;
    let mut groups = result.clustering.clusters();
    for g in &mut groups {
        ws.by_time(g);
    }
    groups.sort_by_key(|g| (ws.corpus.get(g[0]).map(|e| e.timestamp), g[0]));
    let instances = groups
        .into_iter()
        .enumerate()
        .map(|(i, email_ids)| ProcessInstance { instance_id: first_id + i, topic_cluster_id: tc.cluster_id, email_ids })
        .collect();
    Ok(TopicInstances { topic_cluster_id: tc.cluster_id, dendrogram, cut: CutResultSummary::from(&result), instances })
}

pub fn estimate_k(instances: &[ProcessInstance]) -> Result<InstanceStats, PipelineError> {
    if instances.is_empty() {
        return Err(PipelineError::NoInstances);
    }
    let sizes: Vec<usize> = instances.iter().map(|i| i.email_ids.len()).collect();
    let total: usize = sizes.iter().sum();
    let average_size = total as f64 / sizes.len() as f64;
    let k = (average_size.round_ties_even() as usize).clamp(2.min(total), total);
    Ok(InstanceStats { average_size, sizes, k })
}

/// Instance whose size is closest to round(N); ties go to the earliest start.
pub fn select_seed_instance<'a>(
    ws: &Workspace,
    instances: &'a [ProcessInstance],
    stats: &InstanceStats,
    override_id: Option<usize>,
) -> Result<&'a ProcessInstance, PipelineError> {
    if let Some(id) = override_id {
        return instances.iter().find(|i| i.instance_id == id).ok_or(PipelineError::UnknownInstance(id));
    }
    let target = stats.average_size.round_ties_even() as usize;
    instances
        .iter()
        .min_by_key(|i| {
            let first = i.email_ids[0];
            (i.email_ids.len().abs_diff(target), ws.email(first).map(|e| e.timestamp), first)
        })
        .ok_or(PipelineError::NoInstances)
}

/// Maps terms to synset keys; terms not in the table map to themselves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SynonymTable {
    map: BTreeMap<String, String>,
}

impl SynonymTable {
    /// Parses `term<TAB>key` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, PipelineError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t').map(str::trim);
            match (parts.next(), parts.next(), parts.next()) {
                (Some(term), Some(key), None) if !term.is_empty() && !key.is_empty() => {
                    map.insert(term.to_lowercase(), key.to_lowercase());
                }
                _ => {
                    return Err(PipelineError::SynonymSyntax {
                        line: n + 1,
                        message: "expected `term<TAB>key`".into(),
                    })
                }
            }
        }
        Ok(Self { map })
    }

    pub fn english() -> Self {
        Self::parse(ENGLISH_SYNONYMS).expect("bundled synonym table is well formed")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self { map: pairs.into_iter().map(|(t, k)| (t.to_string(), k.to_string())).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn key<'a>(&'a self, term: &'a str) -> &'a str {
        self.map.get(term).map(String::as_str).unwrap_or(term)
    }
}

/// Column mapping from a vocabulary onto its synset keys.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymFold {
    pub vocabulary: Vec<String>,
    column_map: Vec<usize>,
}

impl SynonymFold {
    pub fn new(vocabulary: &[String], table: &SynonymTable) -> Self {
        let keys: BTreeSet<&str> = vocabulary.iter().map(|t| table.key(t)).collect();
        let folded: Vec<String> = keys.into_iter().map(str::to_string).collect();
        let column_map = vocabulary
            .iter()
            .map(|t| folded.binary_search_by(|k| k.as_str().cmp(table.key(t))).expect("key collected above"))
            .collect();
        Self { vocabulary: folded, column_map }
    }

    /// Sums columns sharing a key, then L2-normalizes.
    pub fn apply(&self, v: &SparseVec) -> SparseVec {
        SparseVec::from_pairs(self.vocabulary.len(), v.entries.iter().map(|&(j, x)| (self.column_map[j], x))).normalized()
    }
}

pub fn fold_synonyms(m: &TermMatrix, table: &SynonymTable) -> TermMatrix {
    let fold = SynonymFold::new(&m.vocabulary, table);
    TermMatrix {
        doc_ids: m.doc_ids.clone(),
        rows: m.rows.iter().map(|r| fold.apply(r)).collect(),
        vocabulary: fold.vocabulary,
        field: m.field,
    }
}

/// Dense space in which activity k-means runs: the weighted concatenation
/// `[sqrt(w_s) * subject, sqrt(w_b) * body, sqrt(w_p) * participants]` of
/// (optionally synonym-folded) unit vectors, so that its squared Euclidean
/// distance is the weighted sum of the per-field squared distances.
#[derive(Debug, Clone)]
pub struct ActivitySpace {
    subject_fold: Option<SynonymFold>,
    body_fold: Option<SynonymFold>,
    subject_dim: usize,
    body_dim: usize,
    participants: Vec<String>,
    scale: [f64; 3],
}

impl ActivitySpace {
    pub fn new(ws: &Workspace, spec: &DistanceSpec, synonyms: &SynonymTable) -> Result<Self, PipelineError> {
        spec.validate()?;
        if spec.w_time > 0.0 {
            return Err(PipelineError::TimeInActivitySpace);
        }
        let w = spec.normalized();
        let (subject_fold, body_fold) = if spec.use_synonyms {
            (
                Some(SynonymFold::new(&ws.matrices.subject.vocabulary, synonyms)),
                Some(SynonymFold::new(&ws.matrices.body.vocabulary, synonyms)),
            )
        } else {
            (None, None)
        };
        let subject_dim = subject_fold.as_ref().map_or(ws.matrices.subject.n_terms(), |f| f.vocabulary.len());
        let body_dim = body_fold.as_ref().map_or(ws.matrices.body.n_terms(), |f| f.vocabulary.len());
        let participants = if w.w_participants > 0.0 {
            let all: BTreeSet<String> = ws.corpus.emails.iter().flat_map(|e| e.participants()).collect();
            all.into_iter().collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            subject_fold,
            body_fold,
            subject_dim,
            body_dim,
            participants,
            scale: [w.w_subject.sqrt(), w.w_body.sqrt(), w.w_participants.sqrt()],
        })
    }

    pub fn dim(&self) -> usize {
        self.subject_dim + self.body_dim + self.participants.len()
    }

    /// Embeds vectors produced by the workspace's text model.
    pub fn embed(&self, subject: &SparseVec, body: &SparseVec, participants: &BTreeSet<String>) -> Vec<f64> {
        let fold = |f: &Option<SynonymFold>, v: &SparseVec| f.as_ref().map_or_else(|| v.clone(), |f| f.apply(v));
        let mut out = Vec::with_capacity(self.dim());
        out.extend(fold(&self.subject_fold, subject).to_dense().into_iter().map(|x| x * self.scale[0]));
        out.extend(fold(&self.body_fold, body).to_dense().into_iter().map(|x| x * self.scale[1]));
        if !self.participants.is_empty() {
            let hits: Vec<bool> = self.participants.iter().map(|p| participants.contains(p)).collect();
            let count = hits.iter().filter(|&&h| h).count();
            let value = if count == 0 { 0.0 } else { self.scale[2] / (count as f64).sqrt() };
            out.extend(hits.into_iter().map(|h| if h { value } else { 0.0 }));
        }
        out
    }

    pub fn embed_email(&self, ws: &Workspace, id: EmailId) -> Result<Vec<f64>, PipelineError> {
        let v = ws.vectors(id).ok_or(ClusterError::UnknownId(id))?;
        Ok(self.embed(&v.subject, &v.body, &v.participants))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub silhouette: f64,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicActivities {
    pub topic_cluster_id: usize,
    pub stats: InstanceStats,
    pub seed_instance_id: usize,
    pub k: usize,
    pub user_k: bool,
    pub sweep: Vec<SweepEntry>,
    pub clusters: Vec<ActivityCluster>,
}

/// k values tried around the estimate: `k_est - radius ..= k_est + radius`, within [2, n].
pub fn default_sweep(k_est: usize, radius: usize, n: usize) -> Vec<usize> {
    let lo = k_est.saturating_sub(radius).max(2);
    let hi = (k_est + radius).min(n);
    (lo..=hi).collect()
}

/// Initial centroids for `k` clusters from the seed instance's emails.
/// With fewer clusters than seed emails, a greedy farthest-point subset of the
/// seed is used; with more, the farthest topic emails are added.
pub fn seed_centroids(
    seed: &[EmailId],
    pool: &[EmailId],
    vectors: &BTreeMap<EmailId, Vec<f64>>,
    k: usize,
) -> Vec<Vec<f64>> {
    let d = |a: EmailId, b: EmailId| Euclidean.distance(&vectors[&a], &vectors[&b]);
    let mut chosen: Vec<EmailId> = Vec::new();
    if k >= seed.len() {
        chosen.extend_from_slice(seed);
    } else if k > 0 {
        let mut first = (seed[0], seed[0], f64::NEG_INFINITY);
        for (i, &a) in seed.iter().enumerate() {
            for &b in &seed[i + 1..] {
                if d(a, b) > first.2 {
                    first = (a, b, d(a, b));
                }
            }
        }
        chosen.push(first.0);
        if k > 1 {
            chosen.push(first.1);
        }
        while chosen.len() < k {
            chosen.push(farthest(seed, &chosen, &d));
        }
        chosen.sort_by_key(|id| seed.iter().position(|s| s == id));
    }
    let mut candidates: Vec<EmailId> = pool.iter().copied().filter(|id| !seed.contains(id)).collect();
    candidates.sort_unstable();
    while chosen.len() < k {
        let next = farthest(&candidates, &chosen, &d);
        chosen.push(next);
    }
    chosen.iter().map(|id| vectors[id].clone()).collect()
}

/// Candidate maximizing the minimum distance to `chosen`; first one wins ties.
fn farthest(candidates: &[EmailId], chosen: &[EmailId], d: &dyn Fn(EmailId, EmailId) -> f64) -> EmailId {
    let mut best: Option<(EmailId, f64)> = None;
    for &c in candidates.iter().filter(|c| !chosen.contains(c)) {
        let gap = chosen.iter().map(|&x| d(c, x)).fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((c, gap));
        }
    }
    best.expect("k never exceeds the topic size").0
}

/// k-means over one topic cluster for every k of `sweep` (plus `user_k`),
/// keeping the user's k or else the best silhouette. Activity ids start at
/// `first_id` and follow centroid order.
#[allow(clippy::too_many_arguments)]
pub fn cluster_activities(
    ws: &Workspace,
    space: &ActivitySpace,
    tc: &TopicCluster,
    instances: &[ProcessInstance],
    seed: &ProcessInstance,
    sweep: &[usize],
    user_k: Option<usize>,
    first_id: usize,
) -> Result<TopicActivities, PipelineError> {
    if seed.topic_cluster_id != tc.cluster_id || !seed.email_ids.iter().all(|id| tc.email_ids.contains(id)) {
        return Err(PipelineError::SeedOutsideTopic { instance: seed.instance_id, topic: tc.cluster_id });
    }
    let stats = estimate_k(instances)?;
    let n = tc.email_ids.len();
    let ids = &tc.email_ids;
    let vectors: BTreeMap<EmailId, Vec<f64>> =
        ids.iter().map(|&id| Ok((id, space.embed_email(ws, id)?))).collect::<Result<_, PipelineError>>()?;
    let dense: Vec<Vec<f64>> = ids.iter().map(|id| vectors[id].clone()).collect();
    let pairwise = DistanceMatrix::from_fn(ids.clone(), |i, j| Euclidean.distance(&dense[i], &dense[j]));

    let max_k = n.max(1);
    let min_k = 2.min(n);
    let mut ks: BTreeSet<usize> = sweep.iter().copied().collect();
    if let Some(k) = user_k {
        ks.insert(k);
    }
    if ks.is_empty() {
        ks.insert(stats.k);
    }
    if let Some(&k) = ks.iter().find(|&&k| k < min_k || k > max_k) {
        return Err(PipelineError::KOutOfRange { k, max: max_k });
    }

    let mut runs = Vec::new();
    for &k in &ks {
        let init = seed_centroids(&seed.email_ids, ids, &vectors, k);
        let result = kmeans(ids, &dense, &KMeansConfig::new(init), &Euclidean)?;
        let s = silhouette(&result.clustering, &pairwise)?;
        let entry = SweepEntry {
            k,
            silhouette: s,
            objective: *result.objective_trace.last().unwrap_or(&0.0),
            iterations: result.iterations,
        };
        runs.push((entry, result));
    }
    let chosen = match user_k {
        Some(k) => runs.iter().position(|(e, _)| e.k == k).expect("user k was run"),
        None => {
            let mut best = 0;
            for (i, (e, _)) in runs.iter().enumerate() {
                let b = &runs[best].0;
                if e.silhouette > b.silhouette && !crate::cluster::agglomerative::is_tie(e.silhouette, b.silhouette) {
                    best = i;
                }
            }
            best
        }
    };
    let sweep_report: Vec<SweepEntry> = runs.iter().map(|(e, _)| e.clone()).collect();
    let (entry, result) = runs.swap_remove(chosen);
    let mut clusters = Vec::new();
    for (c, members) in result.clustering.clusters().into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        let medoid_id = medoid(&members, &pairwise)?;
        clusters.push(ActivityCluster {
            activity_id: first_id + clusters.len(),
            topic_cluster_id: tc.cluster_id,
            email_ids: members,
            medoid_id,
            centroid: result.centroids[c].clone(),
        });
    }
    Ok(TopicActivities {
        topic_cluster_id: tc.cluster_id,
        stats,
        seed_instance_id: seed.instance_id,
        k: entry.k,
        user_k: user_k.is_some(),
        sweep: sweep_report,
        clusters,
    })
}
