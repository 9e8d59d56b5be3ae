//! Pipeline configuration, read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{DistanceSpec, Linkage};
use crate::pipeline::{CutSetting, SynonymTable};
use crate::textprep::{self, BoostConfig, CleansingConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    /// `key` is the dotted path of the offending setting when it is known.
    #[error("invalid configuration{}: {message}", key.as_ref().map(|k| format!(" at `{k}`")).unwrap_or_default())]
    Invalid { key: Option<String>, message: String },
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl ConfigError {
    fn at(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { key: Some(key.to_string()), message: message.into() }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => key.as_deref(),
            ConfigError::Io { .. } => None,
        }
    }
}

/// Where a word list comes from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WordListSource {
    #[default]
    English,
    None,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleansingSection {
    pub stopwords: WordListSource,
    pub remove_numbers: bool,
    pub remove_punctuation: bool,
    pub lowercase: bool,
    pub min_token_length: usize,
}

impl Default for CleansingSection {
    fn default() -> Self {
        let d = CleansingConfig::default();
        Self {
            stopwords: WordListSource::English,
            remove_numbers: d.remove_numbers,
            remove_punctuation: d.remove_punctuation,
            lowercase: d.lowercase,
            min_token_length: d.min_token_length,
        }
    }
}

/// Settings of one hierarchical clustering phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopicSection {
    pub distance: DistanceSpec,
    pub linkage: Linkage,
    pub cut: CutSetting,
}

impl Default for TopicSection {
    fn default() -> Self {
        Self { distance: DistanceSpec::topic_default(), linkage: Linkage::Complete, cut: CutSetting::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InstanceSection {
    pub distance: DistanceSpec,
    pub linkage: Linkage,
    pub cut: CutSetting,
}

impl Default for InstanceSection {
    fn default() -> Self {
        Self { distance: DistanceSpec::instance_default(), linkage: Linkage::Complete, cut: CutSetting::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivitySection {
    pub distance: DistanceSpec,
    /// Fixed number of activities; the silhouette-best k of the sweep otherwise.
    pub k: Option<usize>,
    /// The sweep covers `estimate - radius ..= estimate + radius`.
    pub k_sweep_radius: usize,
    /// Explicit sweep replacing the radius rule.
    pub k_sweep: Option<Vec<usize>>,
    pub synonyms: WordListSource,
}

impl Default for ActivitySection {
    fn default() -> Self {
        Self {
            distance: DistanceSpec::activity_default(),
            k: None,
            k_sweep_radius: 2,
            k_sweep: None,
            synonyms: WordListSource::English,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub cleansing: CleansingSection,
    pub boost: BoostConfig,
    pub topics: TopicSection,
    pub instances: InstanceSection,
    pub activities: ActivitySection,
}

/// Pulls the field name out of serde's "unknown field `x`" style messages.
fn offending_field(message: &str) -> Option<String> {
    let patterns = ["unknown field `", "missing field `", "unknown variant `"];
    patterns.iter().find_map(|p| {
        let start = message.find(p)? + p.len();
        let end = message[start..].find('`')?;
        Some(message[start..start + end].to_string())
    })
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = offending_field(&message).or_else(|| {
                e.span().and_then(|span| {
                    let line = text[..span.start].lines().last().unwrap_or("");
                    line.split('=').next().map(|k| k.trim().trim_matches(['[', ']']).to_string())
                })
            });
            ConfigError::Invalid { key: key.filter(|k| !k.is_empty()), message }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.cleansing.min_token_length == 0 {
            return Err(ConfigError::at("cleansing.min_token_length", "must be at least 1"));
        }
        self.boost.validate().map_err(|e| ConfigError::at("boost.subject_term_weight", e.to_string()))?;
        for (name, spec) in [
            ("topics.distance", &self.topics.distance),
            ("instances.distance", &self.instances.distance),
            ("activities.distance", &self.activities.distance),
        ] {
            spec.validate().map_err(|e| ConfigError::at(name, e.to_string()))?;
        }
        if self.activities.distance.w_time > 0.0 {
            return Err(ConfigError::at("activities.distance.w_time", "activity clustering ignores time; set it to 0"));
        }
        if self.topics.distance.w_time > 0.0 {
            return Err(ConfigError::at("topics.distance.w_time", "topic clustering uses subject and body only"));
        }
        for (name, cut) in [("topics.cut", self.topics.cut), ("instances.cut", self.instances.cut)] {
            match cut {
                CutSetting::K(0) => return Err(ConfigError::at(name, "k must be at least 1")),
                CutSetting::Height(h) if !(h >= 0.0) => {
                    return Err(ConfigError::at(name, "height must be non-negative"))
                }
                _ => {}
            }
        }
        if matches!(self.activities.k, Some(k) if k < 2) {
            return Err(ConfigError::at("activities.k", "k must be at least 2"));
        }
        if let Some(sweep) = &self.activities.k_sweep {
            if sweep.is_empty() || sweep.iter().any(|&k| k < 2) {
                return Err(ConfigError::at("activities.k_sweep", "values must be at least 2"));
            }
        }
        Ok(())
    }

    pub fn cleansing_config(&self) -> Result<CleansingConfig, ConfigError> {
        let stopwords = match &self.cleansing.stopwords {
            WordListSource::English => textprep::english_stopwords(),
            WordListSource::None => Default::default(),
            WordListSource::File(path) => textprep::load_stopwords(path)
                .map_err(|e| ConfigError::at("cleansing.stopwords", e.to_string()))?,
        };
        Ok(CleansingConfig {
            stopwords,
            remove_numbers: self.cleansing.remove_numbers,
            remove_punctuation: self.cleansing.remove_punctuation,
            lowercase: self.cleansing.lowercase,
            min_token_length: self.cleansing.min_token_length,
        })
    }

    pub fn synonym_table(&self) -> Result<SynonymTable, ConfigError> {
        match &self.activities.synonyms {
            WordListSource::English => Ok(SynonymTable::english()),
            WordListSource::None => Ok(SynonymTable::default()),
            WordListSource::File(path) => {
                SynonymTable::load(path).map_err(|e| ConfigError::at("activities.synonyms", e.to_string()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml();
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let cfg = PipelineConfig::from_toml(
            "[topics]\ncut = { k = 3 }\nlinkage = \"average\"\n[topics.distance]\nw_subject = 0.2\nw_body = 0.8\n",
        )
        .unwrap();
        assert_eq!(cfg.topics.cut, CutSetting::K(3));
        assert_eq!(cfg.topics.linkage, Linkage::Average);
        assert_eq!(cfg.topics.distance.w_subject, 0.2);
        assert_eq!(cfg.instances, PipelineConfig::default().instances);
        let cfg = PipelineConfig::from_toml("[instances]\ncut = { k = 4 }\n").unwrap();
        assert_eq!(cfg.instances.distance, DistanceSpec::instance_default());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = PipelineConfig::from_toml("[topics]\nlinkag = \"single\"\n").unwrap_err();
        assert_eq!(err.key(), Some("linkag"));
        let err = PipelineConfig::from_toml("colour = 1\n").unwrap_err();
        assert_eq!(err.key(), Some("colour"));
    }

    #[test]
    fn invalid_values_are_named() {
        let err = PipelineConfig::from_toml("[boost]\nsubject_term_weight = 0.5\n").unwrap_err();
        assert_eq!(err.key(), Some("boost.subject_term_weight"));
        let err = PipelineConfig::from_toml("[activities.distance]\nw_subject = 1.0\nw_body = 1.0\nw_time = 0.5\n")
            .unwrap_err();
        assert_eq!(err.key(), Some("activities.distance.w_time"));
        let err = PipelineConfig::from_toml("[cleansing]\nmin_token_length = 0\n").unwrap_err();
        assert_eq!(err.key(), Some("cleansing.min_token_length"));
    }

    #[test]
    fn word_list_sources() {
        let cfg = PipelineConfig::from_toml("[cleansing]\nstopwords = \"none\"\n[activities]\nsynonyms = { file = \"x.tsv\" }\n")
            .unwrap();
        assert!(cfg.cleansing_config().unwrap().stopwords.is_empty());
        assert_eq!(cfg.synonym_table().unwrap_err().key(), Some("activities.synonyms"));
    }
}
