//! Activity labels given by the user and nearest-centroid classification of
//! new emails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{Euclidean, VectorDistance};
use crate::ingest::{Email, EmailId};
use crate::pipeline::ActivityCluster;

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("label must not be empty")]
    EmptyLabel,
    #[error("unknown activity cluster {0}")]
    UnknownActivity(usize),
    #[error("no activity clusters to label")]
    NoActivities,
    #[error("no labeled activities")]
    EmptyStore,
    #[error("labels file row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("labels file: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    User,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub label: String,
    pub labeled_by: LabelSource,
    pub centroid: Vec<f64>,
    pub medoid_email_id: EmailId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub activity_id: usize,
    pub previous: Option<String>,
    pub label: String,
    pub labeled_by: LabelSource,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelStore {
    pub entries: BTreeMap<usize, LabelEntry>,
    pub topic_labels: BTreeMap<usize, String>,
    pub audit: Vec<AuditEntry>,
}

/// Trims and rejects empty labels.
pub fn normalize_label(label: &str) -> Result<String, LabelError> {
    let label = label.trim();
    if label.is_empty() {
        Err(LabelError::EmptyLabel)
    } else {
        Ok(label.to_string())
    }
}

impl LabelStore {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, activity_id: usize) -> Option<&str> {
        self.entries.get(&activity_id).map(|e| e.label.as_str())
    }

    /// Records `label` for an activity. Returns whether anything changed;
    /// repeating the current label is a no-op and leaves no audit entry.
    pub fn assign_label(
        &mut self,
        activities: &[ActivityCluster],
        activity_id: usize,
        label: &str,
        source: LabelSource,
    ) -> Result<bool, LabelError> {
        let label = normalize_label(label)?;
        let cluster = activities
            .iter()
            .find(|a| a.activity_id == activity_id)
            .ok_or(LabelError::UnknownActivity(activity_id))?;
        let previous = self.entries.get(&activity_id).map(|e| e.label.clone());
        if previous.as_deref() == Some(label.as_str()) {
            return Ok(false);
        }
        self.entries.insert(
            activity_id,
            LabelEntry {
                label: label.clone(),
                labeled_by: source,
                centroid: cluster.centroid.clone(),
                medoid_email_id: cluster.medoid_id,
            },
        );
        self.audit.push(AuditEntry { activity_id, previous, label, labeled_by: source });
        Ok(true)
    }

    pub fn set_topic_label(&mut self, topic_id: usize, label: &str) -> Result<bool, LabelError> {
        let label = normalize_label(label)?;
        Ok(self.topic_labels.insert(topic_id, label.clone()).as_deref() != Some(label.as_str()))
    }

    /// Activity ids among `activities` that have no label yet.
    pub fn unlabeled<'a>(&self, activities: impl IntoIterator<Item = &'a ActivityCluster>) -> Vec<usize> {
        activities.into_iter().map(|a| a.activity_id).filter(|id| !self.entries.contains_key(id)).collect()
    }

    /// Label of every email covered by a labeled activity.
    pub fn email_labels(&self, activities: &[ActivityCluster]) -> BTreeMap<EmailId, String> {
        let mut out = BTreeMap::new();
        for a in activities {
            if let Some(entry) = self.entries.get(&a.activity_id) {
                for &id in &a.email_ids {
                    out.insert(id, entry.label.clone());
                }
            }
        }
        out
    }
}

/// Medoid email of every activity cluster, for display.
pub fn propose_medoids<'a>(
    activities: &'a [ActivityCluster],
    emails: &'a BTreeMap<EmailId, &'a Email>,
) -> Result<Vec<(&'a ActivityCluster, &'a Email)>, LabelError> {
    if activities.is_empty() {
        return Err(LabelError::NoActivities);
    }
    Ok(activities.iter().filter_map(|a| emails.get(&a.medoid_id).map(|e| (a, *e))).collect())
}

/// Reads `activity_id,label` rows (with a header line).
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<(usize, String)>, LabelError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(label_col)) = (col("activity_id"), col("label")) else {
        return Err(LabelError::Row { row: 0, message: "header must contain activity_id and label".into() });
    };
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let id: usize = record
            .get(id_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| LabelError::Row { row, message: "activity_id is not an integer".into() })?;
        if !seen.insert(id) {
            return Err(LabelError::Row { row, message: format!("activity {id} listed twice") });
        }
        let label = normalize_label(record.get(label_col).unwrap_or(""))
            .map_err(|e| LabelError::Row { row, message: e.to_string() })?;
        out.push((id, label));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClassificationResult {
    Classified {
        email_id: EmailId,
        predicted_activity_id: usize,
        predicted_label: String,
        distance_to_centroid: f64,
        confidence: f64,
    },
    Unclassifiable {
        email_id: EmailId,
        reason: String,
    },
}

impl ClassificationResult {
    pub fn label(&self) -> Option<&str> {
        match self {
            ClassificationResult::Classified { predicted_label, .. } => Some(predicted_label),
            ClassificationResult::Unclassifiable { .. } => None,
        }
    }
}

/// 1 - d1 / (d1 + d2); equal zero distances give 0.5.
pub fn confidence(nearest: f64, second: Option<f64>) -> f64 {
    match second {
        None => 1.0,
        Some(d2) if nearest + d2 == 0.0 => 0.5,
        Some(d2) => 1.0 - nearest / (nearest + d2),
    }
}

/// Nearest labeled centroid to `embedding`. Ties go to the smaller activity id.
pub fn classify_embedding(
    email_id: EmailId,
    embedding: &[f64],
    store: &LabelStore,
) -> Result<ClassificationResult, LabelError> {
    if store.is_empty() {
        return Err(LabelError::EmptyStore);
    }
    if embedding.iter().all(|&x| x == 0.0) {
        return Ok(ClassificationResult::Unclassifiable {
            email_id,
            reason: "no known terms after cleansing".into(),
        });
    }
    let mut distances: Vec<(f64, usize)> =
        store.entries.iter().map(|(&id, e)| (Euclidean.distance(embedding, &e.centroid), id)).collect();
    distances.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (d1, id) = distances[0];
    Ok(ClassificationResult::Classified {
        email_id,
        predicted_activity_id: id,
        predicted_label: store.entries[&id].label.clone(),
        distance_to_centroid: d1,
        confidence: confidence(d1, distances.get(1).map(|d| d.0)),
    })
}
