//! The run file: corpus, configuration, every phase's output and the label
//! store, persisted as one JSON document.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::Dendrogram;
use crate::config::{ConfigError, PipelineConfig};
use crate::ingest::{Corpus, Email, EmailId};
use crate::labeling::{self, ClassificationResult, LabelError, LabelSource, LabelStore};
use crate::pipeline::{
    self, ActivityCluster, ActivitySpace, CutSetting, PipelineError, ProcessInstance, TopicActivities, TopicCluster,
    TopicInstances, TopicPhase, Workspace,
};

pub const RUN_FILE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error("{0} has not been run yet")]
    MissingPhase(Phase),
    #[error("unlabeled activity clusters: {0:?}")]
    Unlabeled(Vec<usize>),
    #[error("unknown topic cluster {0}")]
    UnknownTopic(usize),
    #[error("unknown activity cluster {0}")]
    UnknownActivity(usize),
    #[error("run file version {0} is not supported")]
    Version(u32),
    #[error("corpus digest does not match the stored emails")]
    DigestMismatch,
    #[error("run file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Topics,
    Instances,
    Activities,
    Labels,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Topics => "topic clustering",
            Phase::Instances => "instance discovery",
            Phase::Activities => "activity clustering",
            Phase::Labels => "labeling",
        })
    }
}

impl std::str::FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "topics" => Ok(Phase::Topics),
            "instances" => Ok(Phase::Instances),
            "activities" => Ok(Phase::Activities),
            "labels" => Ok(Phase::Labels),
            other => Err(format!("unknown phase `{other}`")),
        }
    }
}

/// Choices made interactively that override the configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_cut: Option<CutSetting>,
    /// Per topic cluster id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub instance_cuts: BTreeMap<usize, CutSetting>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub activity_k: BTreeMap<usize, usize>,
    /// Emails of user-chosen seed instances; a seed applies to the topic
    /// that has an instance with exactly these emails.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<Vec<EmailId>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstancePhase {
    pub topics: Vec<TopicInstances>,
}

impl InstancePhase {
    pub fn all(&self) -> impl Iterator<Item = &ProcessInstance> {
        self.topics.iter().flat_map(|t| &t.instances)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityPhase {
    pub topics: Vec<TopicActivities>,
}

impl ActivityPhase {
    pub fn all(&self) -> impl Iterator<Item = &ActivityCluster> {
        self.topics.iter().flat_map(|t| &t.clusters)
    }

    pub fn of_topic(&self, topic_id: usize) -> Option<&TopicActivities> {
        self.topics.iter().find(|t| t.topic_cluster_id == topic_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub version: u32,
    pub corpus_digest: String,
    pub config: PipelineConfig,
    #[serde(default)]
    pub settings: RunSettings,
    pub corpus: Corpus,
    pub topics: Option<TopicPhase>,
    pub instances: Option<InstancePhase>,
    pub activities: Option<ActivityPhase>,
    pub labels: LabelStore,
}

impl Run {
    pub fn new(corpus: Corpus, config: PipelineConfig) -> Result<Self, RunError> {
        config.validate()?;
        Ok(Self {
            version: RUN_FILE_VERSION,
            corpus_digest: corpus.digest(),
            config,
            settings: RunSettings::default(),
            corpus,
            topics: None,
            instances: None,
            activities: None,
            labels: LabelStore::default(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("run state is always serializable");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let run: Self = serde_json::from_str(text)?;
        if run.version != RUN_FILE_VERSION {
            return Err(RunError::Version(run.version));
        }
        if run.corpus.digest() != run.corpus_digest {
            return Err(RunError::DigestMismatch);
        }
        Ok(run)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| RunError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Writes to a temporary file next to `path`, then renames it into place.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RunError> {
        let path = path.as_ref();
        let io = |source| RunError::Io { path: path.display().to_string(), source };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
        tmp.write_all(self.to_json().as_bytes()).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(path).map_err(|e| io(e.error))?;
        Ok(())
    }

    pub fn workspace(&self) -> Result<Workspace, RunError> {
        let cleansing = self.config.cleansing_config()?;
        Ok(Workspace::new(self.corpus.clone(), &cleansing, &self.config.boost)?)
    }

    pub fn activity_space(&self, ws: &Workspace) -> Result<ActivitySpace, RunError> {
        let synonyms = self.config.synonym_table()?;
        Ok(ActivitySpace::new(ws, &self.config.activities.distance, &synonyms)?)
    }

    /// Replaces the configuration; phase outputs are dropped because they no longer match it.
    pub fn set_config(&mut self, config: PipelineConfig) -> Result<(), RunError> {
        config.validate()?;
        if config != self.config {
            self.config = config;
            self.settings = RunSettings::default();
            self.invalidate_from(Phase::Topics);
        }
        Ok(())
    }

    fn invalidate_from(&mut self, phase: Phase) {
        if phase <= Phase::Topics {
            self.topics = None;
            self.labels.topic_labels.clear();
        }
        if phase <= Phase::Instances {
            self.instances = None;
        }
        if phase <= Phase::Activities {
            self.activities = None;
            self.labels.entries.clear();
        }
    }

    pub fn topic_phase(&self) -> Result<&TopicPhase, RunError> {
        self.topics.as_ref().ok_or(RunError::MissingPhase(Phase::Topics))
    }

    pub fn instance_phase(&self) -> Result<&InstancePhase, RunError> {
        self.instances.as_ref().ok_or(RunError::MissingPhase(Phase::Instances))
    }

    pub fn activity_phase(&self) -> Result<&ActivityPhase, RunError> {
        self.activities.as_ref().ok_or(RunError::MissingPhase(Phase::Activities))
    }

    pub fn topic(&self, id: usize) -> Result<&TopicCluster, RunError> {
        self.topic_phase()?.clusters.iter().find(|t| t.cluster_id == id).ok_or(RunError::UnknownTopic(id))
    }

    pub fn activity(&self, id: usize) -> Result<&ActivityCluster, RunError> {
        self.activity_phase()?.all().find(|a| a.activity_id == id).ok_or(RunError::UnknownActivity(id))
    }

    /// Clusters the corpus into topics; later phases are invalidated.
    pub fn run_topics(&mut self, cut: Option<CutSetting>) -> Result<(), RunError> {
        let ws = self.workspace()?;
        self.run_topics_with(&ws, cut)
    }

    fn run_topics_with(&mut self, ws: &Workspace, cut: Option<CutSetting>) -> Result<(), RunError> {
        if let Some(cut) = cut {
            self.settings.topic_cut = Some(cut);
        }
        let section = &self.config.topics;
        let setting = self.settings.topic_cut.unwrap_or(section.cut);
        let phase = pipeline::cluster_topics(ws, &section.distance, section.linkage, setting)?;
        let old_topics: BTreeMap<Vec<EmailId>, usize> = self
            .topics
            .as_ref()
            .map(|t| t.clusters.iter().map(|c| (c.email_ids.clone(), c.cluster_id)).collect())
            .unwrap_or_default();
        let old_labels = std::mem::take(&mut self.labels.topic_labels);
        let old_settings = std::mem::take(&mut self.settings);
        self.invalidate_from(Phase::Topics);
        self.settings.topic_cut = old_settings.topic_cut;
        self.settings.seeds = old_settings.seeds;
        // Carry labels and per-topic choices over to topics with unchanged membership.
        for c in &phase.clusters {
            if let Some(&old) = old_topics.get(&c.email_ids) {
                if let Some(l) = old_labels.get(&old) {
                    self.labels.topic_labels.insert(c.cluster_id, l.clone());
                }
                if let Some(&cut) = old_settings.instance_cuts.get(&old) {
                    self.settings.instance_cuts.insert(c.cluster_id, cut);
                }
                if let Some(&k) = old_settings.activity_k.get(&old) {
                    self.settings.activity_k.insert(c.cluster_id, k);
                }
            }
        }
        self.topics = Some(phase);
        Ok(())
    }

    /// Splits every topic cluster into process instances. `cut` applies to
    /// `topic` only when given, otherwise to all topics.
    pub fn run_instances(&mut self, cut: Option<CutSetting>, topic: Option<usize>) -> Result<(), RunError> {
        let ws = self.workspace()?;
        self.run_instances_with(&ws, cut, topic)
    }

    fn run_instances_with(&mut self, ws: &Workspace, cut: Option<CutSetting>, topic: Option<usize>) -> Result<(), RunError> {
        let clusters = self.topic_phase()?.clusters.clone();
        if let Some(t) = topic {
            self.topic(t)?;
        }
        if let Some(cut) = cut {
            match topic {
                Some(t) => {
                    self.settings.instance_cuts.insert(t, cut);
                }
                None => {
                    for c in &clusters {
                        self.settings.instance_cuts.insert(c.cluster_id, cut);
                    }
                }
            }
        }
        let section = &self.config.instances;
        let mut topics = Vec::new();
        let mut next_id = 1;
        for tc in &clusters {
            let setting = self.settings.instance_cuts.get(&tc.cluster_id).copied().unwrap_or(section.cut);
            let found = pipeline::discover_instances(ws, tc, &section.distance, section.linkage, setting, next_id)?;
            next_id += found.instances.len();
            topics.push(found);
        }
        self.invalidate_from(Phase::Instances);
        self.instances = Some(InstancePhase { topics });
        Ok(())
    }

    /// Clusters activities in every topic. `k` and `seed_instance` apply to
    /// `topic` (or to the topic containing the seed instance).
    pub fn run_activities(
        &mut self,
        k: Option<usize>,
        topic: Option<usize>,
        seed_instance: Option<usize>,
    ) -> Result<(), RunError> {
        let ws = self.workspace()?;
        self.run_activities_with(&ws, k, topic, seed_instance)
    }

    fn run_activities_with(
        &mut self,
        ws: &Workspace,
        k: Option<usize>,
        topic: Option<usize>,
        seed_instance: Option<usize>,
    ) -> Result<(), RunError> {
        let instance_phase = self.instance_phase()?.clone();
        let clusters = self.topic_phase()?.clusters.clone();
        let mut target_topic = topic;
        if let Some(t) = topic {
            self.topic(t)?;
        }
        if let Some(seed) = seed_instance {
            let inst = instance_phase
                .all()
                .find(|i| i.instance_id == seed)
                .ok_or(PipelineError::UnknownInstance(seed))?;
            match topic {
                Some(t) if t != inst.topic_cluster_id => {
                    return Err(PipelineError::SeedOutsideTopic { instance: seed, topic: t }.into())
                }
                _ => target_topic = Some(inst.topic_cluster_id),
            }
            let siblings: Vec<&Vec<EmailId>> = instance_phase
                .all()
                .filter(|i| i.topic_cluster_id == inst.topic_cluster_id)
                .map(|i| &i.email_ids)
                .collect();
            self.settings.seeds.retain(|s| !siblings.contains(&s));
            self.settings.seeds.push(inst.email_ids.clone());
            self.settings.seeds.sort();
        }
        if let Some(k) = k {
            match target_topic {
                Some(t) => {
                    self.settings.activity_k.insert(t, k);
                }
                None => {
                    for c in &clusters {
                        self.settings.activity_k.insert(c.cluster_id, k);
                    }
                }
            }
        }

        let space = self.activity_space(ws)?;
        let section = &self.config.activities;
        let mut topics = Vec::new();
        let mut next_id = 1;
        for tc in &clusters {
            let instances: Vec<ProcessInstance> =
                instance_phase.all().filter(|i| i.topic_cluster_id == tc.cluster_id).cloned().collect();
            let stats = pipeline::estimate_k(&instances)?;
            let chosen = instances.iter().find(|i| self.settings.seeds.contains(&i.email_ids)).map(|i| i.instance_id);
            let seed = pipeline::select_seed_instance(ws, &instances, &stats, chosen)?;
            let n = tc.email_ids.len();
            let sweep = match &section.k_sweep {
                Some(ks) => ks.iter().copied().filter(|&k| k <= n).collect(),
                None => pipeline::default_sweep(stats.k, section.k_sweep_radius, n),
            };
            let user_k = self.settings.activity_k.get(&tc.cluster_id).copied().or(section.k).map(|k| k.min(n));
            let found = pipeline::cluster_activities(ws, &space, tc, &instances, seed, &sweep, user_k, next_id)?;
            next_id += found.clusters.len();
            topics.push(found);
        }

        // Labels survive for clusters whose membership did not change.
        let old: BTreeMap<Vec<EmailId>, usize> = self
            .activities
            .as_ref()
            .map(|a| a.all().map(|c| (c.email_ids.clone(), c.activity_id)).collect())
            .unwrap_or_default();
        let old_entries = std::mem::take(&mut self.labels.entries);
        let phase = ActivityPhase { topics };
        for c in phase.all() {
            if let Some(entry) = old.get(&c.email_ids).and_then(|id| old_entries.get(id)) {
                let mut entry = entry.clone();
                entry.centroid = c.centroid.clone();
                entry.medoid_email_id = c.medoid_id;
                self.labels.entries.insert(c.activity_id, entry);
            }
        }
        self.activities = Some(phase);
        Ok(())
    }

    /// Recomputes `phase` with a new k and, when `rerun` is set, every later phase.
    pub fn recut(&mut self, phase: Phase, k: usize, topic: Option<usize>, rerun: bool) -> Result<(), RunError> {
        let ws = self.workspace()?;
        let snapshot = self.clone();
        let result = (|| {
            match phase {
                Phase::Topics => {
                    self.run_topics_with(&ws, Some(CutSetting::K(k)))?;
                    if rerun {
                        self.run_instances_with(&ws, None, None)?;
                        self.rerun_activities_keeping_labels(&ws, &snapshot)?;
                    }
                }
                Phase::Instances => {
                    self.run_instances_with(&ws, Some(CutSetting::K(k)), topic)?;
                    if rerun {
                        self.rerun_activities_keeping_labels(&ws, &snapshot)?;
                    }
                }
                Phase::Activities => {
                    self.run_activities_with(&ws, Some(k), topic, None)?;
                }
                Phase::Labels => return Err(RunError::MissingPhase(Phase::Labels)),
            }
            Ok(())
        })();
        if result.is_err() {
            *self = snapshot;
        }
        result
    }

    fn rerun_activities_keeping_labels(&mut self, ws: &Workspace, before: &Run) -> Result<(), RunError> {
        self.activities = before.activities.clone();
        self.labels.entries = before.labels.entries.clone();
        self.run_activities_with(ws, None, None, None)
    }

    pub fn assign_label(&mut self, activity_id: usize, label: &str, source: LabelSource) -> Result<bool, RunError> {
        let phase = self.activities.as_ref().ok_or(RunError::MissingPhase(Phase::Activities))?;
        let clusters: Vec<ActivityCluster> = phase.all().cloned().collect();
        if !clusters.iter().any(|c| c.activity_id == activity_id) {
            return Err(RunError::UnknownActivity(activity_id));
        }
        Ok(self.labels.assign_label(&clusters, activity_id, label, source)?)
    }

    /// Applies `activity_id,label` rows from a labels file.
    pub fn load_labels(&mut self, reader: impl std::io::Read) -> Result<usize, RunError> {
        let rows = labeling::read_labels_csv(reader)?;
        let mut changed = 0;
        for (id, label) in rows {
            changed += usize::from(self.assign_label(id, &label, LabelSource::File)?);
        }
        Ok(changed)
    }

    pub fn set_topic_label(&mut self, topic_id: usize, label: &str) -> Result<bool, RunError> {
        self.topic(topic_id)?;
        Ok(self.labels.set_topic_label(topic_id, label)?)
    }

    pub fn unlabeled(&self, topic: Option<usize>) -> Result<Vec<usize>, RunError> {
        let phase = self.activity_phase()?;
        Ok(self.labels.unlabeled(phase.all().filter(|a| topic.is_none_or(|t| a.topic_cluster_id == t))))
    }

    /// Topics whose activities are all labeled.
    pub fn fully_labeled_topics(&self) -> Result<Vec<usize>, RunError> {
        let phase = self.activity_phase()?;
        Ok(phase
            .topics
            .iter()
            .filter(|t| !t.clusters.is_empty() && self.labels.unlabeled(&t.clusters).is_empty())
            .map(|t| t.topic_cluster_id)
            .collect())
    }

    pub fn emails_by_id(&self) -> BTreeMap<EmailId, &Email> {
        self.corpus.emails.iter().map(|e| (e.id, e)).collect()
    }

    /// Classifies emails against the labeled centroids of this run.
    pub fn classify(&self, emails: &[Email]) -> Result<Vec<ClassificationResult>, RunError> {
        self.activity_phase()?;
        if self.labels.is_empty() {
            return Err(RunError::MissingPhase(Phase::Labels));
        }
        let ws = self.workspace()?;
        let space = self.activity_space(&ws)?;
        emails
            .iter()
            .map(|e| {
                let (subject, body) = ws.model.vectorize(e);
                let embedding = space.embed(&subject, &body, &e.participants());
                Ok(labeling::classify_embedding(e.id, &embedding, &self.labels)?)
            })
            .collect()
    }

    /// Dendrogram of the topic phase, or of the instance phase of one topic.
    pub fn dendrogram(&self, topic: Option<usize>) -> Result<&Dendrogram, RunError> {
        match topic {
            None => Ok(&self.topic_phase()?.dendrogram),
            Some(t) => {
                self.topic(t)?;
                let phase = self.instance_phase()?;
                phase
                    .topics
                    .iter()
                    .find(|x| x.topic_cluster_id == t)
                    .map(|x| &x.dendrogram)
                    .ok_or(RunError::UnknownTopic(t))
            }
        }
    }

    /// Every partition invariant of the stored phases holds.
    pub fn check_partitions(&self) -> Result<(), String> {
        let all: BTreeSet<EmailId> = self.corpus.ids().into_iter().collect();
        let Some(topics) = &self.topics else { return Ok(()) };
        let covered = partition_union(topics.clusters.iter().map(|c| &c.email_ids))?;
        if covered != all {
            return Err("topic clusters do not cover the corpus".into());
        }
        for tc in &topics.clusters {
            let members: BTreeSet<EmailId> = tc.email_ids.iter().copied().collect();
            if let Some(instances) = &self.instances {
                let own = instances.all().filter(|i| i.topic_cluster_id == tc.cluster_id);
                let own: Vec<&ProcessInstance> = own.collect();
                if partition_union(own.iter().map(|i| &i.email_ids))? != members {
                    return Err(format!("instances of topic {} do not partition it", tc.cluster_id));
                }
                for inst in own {
                    let times: Vec<_> = inst.email_ids.iter().map(|id| self.corpus.get(*id).map(|e| e.timestamp)).collect();
                    if times.windows(2).any(|w| w[0] > w[1]) {
                        return Err(format!("instance {} is not in timestamp order", inst.instance_id));
                    }
                }
            }
            if let Some(acts) = &self.activities {
                let own = acts.all().filter(|a| a.topic_cluster_id == tc.cluster_id).map(|a| &a.email_ids);
                if partition_union(own)? != members {
                    return Err(format!("activities of topic {} do not partition it", tc.cluster_id));
                }
            }
        }
        Ok(())
    }
}

fn partition_union<'a>(groups: impl Iterator<Item = &'a Vec<EmailId>>) -> Result<BTreeSet<EmailId>, String> {
    let mut seen = BTreeSet::new();
    for g in groups {
        if g.is_empty() {
            return Err("empty cluster".into());
        }
        for &id in g {
            if !seen.insert(id) {
                return Err(format!("email {id} appears in two clusters"));
            }
        }
    }
    Ok(seen)
}
