use std::collections::BTreeSet;
use std::io::Write;

use chrono::{DateTime, FixedOffset};
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::ingest::EmailId;
use crate::textprep::SparseVec;

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Weights of the composite email distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSpec {
    pub w_subject: f64,
    pub w_body: f64,
    #[serde(default)]
    pub w_time: f64,
    /// Time gap mapped to distance 1.
    #[serde(default = "default_t_max_days")]
    pub t_max_days: f64,
    #[serde(default)]
    pub use_synonyms: bool,
    #[serde(default)]
    pub w_participants: f64,
}

fn default_t_max_days() -> f64 {
    14.0
}

/// Attribute combinations compared when discovering process instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceVariant {
    Body,
    BodySubject,
    BodySubjectTime,
}

impl DistanceSpec {
    /// Topic phase: subject and body only, body weighted higher.
    pub fn topic_default() -> Self {
        Self { w_subject: 0.1, w_body: 0.9, w_time: 0.0, t_max_days: 14.0, use_synonyms: false, w_participants: 0.0 }
    }

    pub fn instance_default() -> Self {
        Self::instance_variant(InstanceVariant::BodySubjectTime)
    }

    pub fn instance_variant(variant: InstanceVariant) -> Self {
        let (w_body, w_subject, w_time) = match variant {
            InstanceVariant::Body => (1.0, 0.0, 0.0),
            InstanceVariant::BodySubject => (0.4, 0.2, 0.0),
            InstanceVariant::BodySubjectTime => (0.4, 0.2, 0.4),
        };
        Self { w_subject, w_body, w_time, t_max_days: 14.0, use_synonyms: false, w_participants: 0.0 }
    }

    /// Activity phase: synonym-folded text, no time.
    pub fn activity_default() -> Self {
        Self { w_subject: 0.3, w_body: 0.7, w_time: 0.0, t_max_days: 14.0, use_synonyms: true, w_participants: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ClusterError> {
        let weights = [self.w_subject, self.w_body, self.w_time, self.w_participants];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ClusterError::InvalidSpec("weights must be finite and non-negative".into()));
        }
        if weights.iter().all(|w| *w == 0.0) {
            return Err(ClusterError::InvalidSpec("at least one weight must be positive".into()));
        }
        if !(self.t_max_days.is_finite() && self.t_max_days > 0.0) {
            return Err(ClusterError::InvalidSpec("t_max_days must be positive".into()));
        }
        Ok(())
    }

    /// Same spec with weights rescaled to sum to 1.
    pub fn normalized(&self) -> Self {
        let total = self.w_subject + self.w_body + self.w_time + self.w_participants;
        Self {
            w_subject: self.w_subject / total,
            w_body: self.w_body / total,
            w_time: self.w_time / total,
            w_participants: self.w_participants / total,
            ..*self
        }
    }
}

/// Per-email representation used by the composite distance.
#[derive(Debug, Clone, PartialEq)]
pub struct EmailVectors {
    pub id: EmailId,
    pub subject: SparseVec,
    pub body: SparseVec,
    pub timestamp: DateTime<FixedOffset>,
    pub participants: BTreeSet<String>,
}

/// Euclidean distance of unit (or zero) non-negative vectors mapped into [0, 1].
/// Two zero vectors are at distance 0; a zero and a nonzero vector at 1.
pub fn text_distance(a: &SparseVec, b: &SparseVec) -> Result<f64, ClusterError> {
    if a.dim != b.dim {
        return Err(ClusterError::VocabularyMismatch { left: a.dim, right: b.dim });
    }
    Ok(match (a.is_zero(), b.is_zero()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        (false, false) => (a.euclidean(b) / std::f64::consts::SQRT_2).min(1.0),
    })
}

pub fn time_distance(a: &DateTime<FixedOffset>, b: &DateTime<FixedOffset>, t_max_days: f64) -> f64 {
    let gap = (*a - *b).num_seconds().unsigned_abs() as f64;
    (gap / (t_max_days * SECONDS_PER_DAY)).min(1.0)
}

pub fn participant_distance(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.intersection(b).next().is_some() {
        0.0
    } else {
        1.0
    }
}

pub fn email_distance(a: &EmailVectors, b: &EmailVectors, spec: &DistanceSpec) -> Result<f64, ClusterError> {
    spec.validate()?;
    let w = spec.normalized();
    let mut d = 0.0;
    // Components with zero weight are skipped, but vocabularies are always checked.
    let ds = text_distance(&a.subject, &b.subject)?;
    let db = text_distance(&a.body, &b.body)?;
    d += w.w_subject * ds + w.w_body * db;
    if w.w_time > 0.0 {
        d += w.w_time * time_distance(&a.timestamp, &b.timestamp, spec.t_max_days);
    }
    if w.w_participants > 0.0 {
        d += w.w_participants * participant_distance(&a.participants, &b.participants);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Dense symmetric distance matrix indexed by position in `ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub ids: Vec<EmailId>,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(ids: Vec<EmailId>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = ids.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = f(i, j);
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { ids, data }
    }

    /// Validates symmetry, zero diagonal and non-negativity.
    pub fn from_rows(ids: Vec<EmailId>, rows: &[Vec<f64>]) -> Result<Self, ClusterError> {
        let n = ids.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ClusterError::InvalidMatrix("matrix shape does not match ids".into()));
        }
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(ClusterError::InvalidMatrix(format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let d = rows[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(ClusterError::InvalidMatrix(format!("invalid entry at ({i},{j})")));
                }
                if (d - rows[j][i]).abs() > 1e-12 {
                    return Err(ClusterError::InvalidMatrix(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self { ids, data: rows.iter().flatten().copied().collect() })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }

    pub fn position(&self, id: EmailId) -> Option<usize> {
        self.ids.iter().position(|&x| x == id)
    }

    pub fn by_id(&self, a: EmailId, b: EmailId) -> Option<f64> {
        Some(self.get(self.position(a)?, self.position(b)?))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { ids: self.ids.clone(), data: self.data.iter().map(|d| d * factor).collect() }
    }

    /// CSV with a header of ids and one row per id.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec![String::from("id")];
        header.extend(self.ids.iter().map(ToString::to_string));
        wtr.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend((0..self.len()).map(|j| self.get(i, j).to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn email_distance_matrix(emails: &[EmailVectors], spec: &DistanceSpec) -> Result<DistanceMatrix, ClusterError> {
    spec.validate()?;
    if let Some(first) = emails.first() {
        for e in emails {
            if e.subject.dim != first.subject.dim || e.body.dim != first.body.dim {
                return Err(ClusterError::VocabularyMismatch { left: first.body.dim, right: e.body.dim });
            }
        }
    }
    let ids = emails.iter().map(|e| e.id).collect();
    Ok(DistanceMatrix::from_fn(ids, |i, j| {
        email_distance(&emails[i], &emails[j], spec).expect("dimensions checked above")
    }))
}
