//! Text cleansing and TF-IDF term matrices for email subjects and bodies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Corpus, Email, EmailId};

/// Stopword list shipped with the crate (one token per line, `#` comments).
pub const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum TextprepError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
}

pub fn parse_word_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn english_stopwords() -> BTreeSet<String> {
    parse_word_list(ENGLISH_STOPWORDS)
}

pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>, TextprepError> {
    let path = path.as_ref();
    std::fs::read_to_string(path)
        .map(|text| parse_word_list(&text))
        .map_err(|source| TextprepError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleansingConfig {
    pub stopwords: BTreeSet<String>,
    pub remove_numbers: bool,
    pub remove_punctuation: bool,
    pub lowercase: bool,
    pub min_token_length: usize,
}

impl Default for CleansingConfig {
    fn default() -> Self {
        Self {
            stopwords: english_stopwords(),
            remove_numbers: true,
            remove_punctuation: true,
            lowercase: true,
            min_token_length: 2,
        }
    }
}

impl CleansingConfig {
    pub fn validate(&self) -> Result<(), TextprepError> {
        if self.min_token_length < 1 {
            return Err(TextprepError::InvalidConfig("min_token_length must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hook applied to every surviving token; the default leaves tokens untouched.
pub trait TokenNormalizer {
    fn normalize(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl TokenNormalizer for Identity {
    fn normalize(&self, token: &str) -> String {
        token.to_string()
    }
}

pub fn cleanse(text: &str, cfg: &CleansingConfig) -> Vec<String> {
    cleanse_with(text, cfg, &Identity)
}

/// Stopwords are checked on the raw (punctuation-trimmed) word, so that
/// contractions such as `don't` are caught before apostrophes are split off,
/// and once more on the final token.
pub fn cleanse_with(text: &str, cfg: &CleansingConfig, normalizer: &dyn TokenNormalizer) -> Vec<String> {
    let text = text.replace(['\u{2019}', '\u{2018}'], "'");
    let text = if cfg.lowercase { text.to_lowercase() } else { text };
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        let trimmed = word.trim_matches(|c: char| !c.is_alphanumeric());
        if cfg.stopwords.contains(trimmed) {
            continue;
        }
        let pieces: Vec<&str> = if cfg.remove_punctuation {
            word.split(|c: char| !c.is_alphanumeric()).collect()
        } else {
            vec![word]
        };
        for piece in pieces {
            let piece: String = if cfg.remove_numbers {
                piece.chars().filter(|c| !c.is_numeric()).collect()
            } else {
                piece.to_string()
            };
            let token = normalizer.normalize(&piece);
            if token.is_empty()
                || token.chars().count() < cfg.min_token_length
                || cfg.stopwords.contains(&token)
            {
                continue;
            }
            tokens.push(token);
        }
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Subject,
    Body,
}

impl Field {
    pub fn text<'a>(&self, email: &'a Email) -> &'a str {
        match self {
            Field::Subject => &email.subject,
            Field::Body => &email.body,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Subject => f.write_str("subject"),
            Field::Body => f.write_str("body"),
        }
    }
}

/// Sparse vector: strictly increasing term indices with their weights, over `dim` terms.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    /// Builds from unordered (index, weight) pairs, summing duplicates and dropping zeros.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, w) in pairs {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            *acc.entry(i).or_insert(0.0) += w;
        }
        Self { dim, entries: acc.into_iter().filter(|&(_, w)| w != 0.0).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w == 0.0)
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn normalized(&self) -> Self {
        let norm = self.norm();
        if norm == 0.0 {
            return Self::zeros(self.dim);
        }
        Self { dim: self.dim, entries: self.entries.iter().map(|&(i, w)| (i, w / norm)).collect() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dim];
        for &(i, w) in &self.entries {
            dense[i] = w;
        }
        dense
    }

    /// Euclidean distance; panics on dimension mismatch (callers check first).
    pub fn euclidean(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        let mut sum = 0.0;
        loop {
            match (a.peek(), b.peek()) {
                (Some(&&(i, x)), Some(&&(j, y))) => {
                    if i == j {
                        sum += (x - y) * (x - y);
                        a.next();
                        b.next();
                    } else if i < j {
                        sum += x * x;
                        a.next();
                    } else {
                        sum += y * y;
                        b.next();
                    }
                }
                (Some(&&(_, x)), None) => {
                    sum += x * x;
                    a.next();
                }
                (None, Some(&&(_, y))) => {
                    sum += y * y;
                    b.next();
                }
                (None, None) => break,
            }
        }
        sum.sqrt()
    }
}

/// Document × term matrix. Rows follow `doc_ids`; vocabulary is sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermMatrix {
    pub doc_ids: Vec<EmailId>,
    pub vocabulary: Vec<String>,
    pub rows: Vec<SparseVec>,
    pub field: Field,
}

impl TermMatrix {
    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocabulary.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn row_of(&self, id: EmailId) -> Option<&SparseVec> {
        self.doc_ids.iter().position(|&d| d == id).map(|i| &self.rows[i])
    }

    pub fn get(&self, doc: usize, term: usize) -> f64 {
        self.rows[doc].get(term)
    }

    /// Value by email id and term, 0 when either is absent.
    pub fn weight(&self, id: EmailId, term: &str) -> f64 {
        match (self.row_of(id), self.term_index(term)) {
            (Some(row), Some(j)) => row.get(j),
            _ => 0.0,
        }
    }

    /// Number of documents with a nonzero entry per term.
    pub fn document_frequency(&self) -> Vec<usize> {
        let mut df = vec![0usize; self.n_terms()];
        for row in &self.rows {
            for &(j, w) in &row.entries {
                if w != 0.0 {
                    df[j] += 1;
                }
            }
        }
        df
    }

    pub fn map_columns(&self, factor: impl Fn(usize) -> f64) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| SparseVec::from_pairs(r.dim, r.entries.iter().map(|&(j, w)| (j, w * factor(j)))))
            .collect();
        Self { rows, ..self.clone() }
    }

    pub fn normalize_rows(&self) -> Self {
        Self { rows: self.rows.iter().map(SparseVec::normalized).collect(), ..self.clone() }
    }

    /// Sparse triplet CSV (`doc_id,term,weight`), nonzero entries only.
    pub fn write_triplets<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["doc_id", "term", "weight"])?;
        for (doc, row) in self.doc_ids.iter().zip(&self.rows) {
            for &(j, w) in &row.entries {
                wtr.write_record([doc.to_string(), self.vocabulary[j].clone(), w.to_string()])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Raw occurrence counts of each cleansed term per email.
pub fn build_term_matrix(corpus: &Corpus, field: Field, cfg: &CleansingConfig) -> TermMatrix {
    let tokens: Vec<Vec<String>> = corpus.emails.iter().map(|e| cleanse(field.text(e), cfg)).collect();
    let vocabulary: Vec<String> =
        tokens.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let dim = vocabulary.len();
    let rows = tokens
        .iter()
        .map(|doc| SparseVec::from_pairs(dim, doc.iter().map(|t| (index[t.as_str()], 1.0))))
        .collect();
    TermMatrix { doc_ids: corpus.ids(), vocabulary, rows, field }
}

/// `ln(D / df)` per term; terms with df = 0 get 0.
pub fn inverse_document_frequency(counts: &TermMatrix) -> Vec<f64> {
    let d = counts.n_docs() as f64;
    counts
        .document_frequency()
        .into_iter()
        .map(|df| if df == 0 { 0.0 } else { (d / df as f64).ln() })
        .collect()
}

/// Count × idf, rows scaled to unit L2 norm (zero rows stay zero).
pub fn tfidf_normalize(counts: &TermMatrix) -> TermMatrix {
    let idf = inverse_document_frequency(counts);
    counts.map_columns(|j| idf[j]).normalize_rows()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    pub subject_term_weight: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self { subject_term_weight: 3.0 }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), TextprepError> {
        if !(self.subject_term_weight.is_finite() && self.subject_term_weight >= 1.0) {
            return Err(TextprepError::InvalidConfig(format!(
                "subject_term_weight must be >= 1, got {}",
                self.subject_term_weight
            )));
        }
        Ok(())
    }
}

/// Union of the cleansed subject tokens of the corpus.
pub fn subject_terms(corpus: &Corpus, cfg: &CleansingConfig) -> BTreeSet<String> {
    corpus.emails.iter().flat_map(|e| cleanse(&e.subject, cfg)).collect()
}

/// Multiplies body columns of subject terms by the boost weight, then re-normalizes rows.
///
/// Because row scaling commutes with column scaling, the input may be the
/// idf-weighted matrix either before or after its own row normalization.
pub fn apply_subject_boost(
    body_matrix: &TermMatrix,
    corpus: &Corpus,
    boost: &BoostConfig,
    cfg: &CleansingConfig,
) -> TermMatrix {
    let terms = subject_terms(corpus, cfg);
    boost_columns(body_matrix, &terms, boost.subject_term_weight)
}

fn boost_columns(m: &TermMatrix, terms: &BTreeSet<String>, weight: f64) -> TermMatrix {
    let boosted: Vec<bool> = m.vocabulary.iter().map(|t| terms.contains(t)).collect();
    m.map_columns(|j| if boosted[j] { weight } else { 1.0 }).normalize_rows()
}

/// Subject and body matrices of one corpus, sharing row order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmailMatrices {
    pub subject: TermMatrix,
    pub body: TermMatrix,
}

/// Everything needed to vectorize an unseen email into the space of a fitted corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TextModel {
    pub cleansing: CleansingConfig,
    pub boost: BoostConfig,
    pub subject_vocabulary: Vec<String>,
    pub subject_idf: Vec<f64>,
    pub body_vocabulary: Vec<String>,
    pub body_idf: Vec<f64>,
    pub boost_terms: BTreeSet<String>,
}

impl TextModel {
    /// Builds normalized subject matrix and subject-boosted body matrix.
    pub fn fit(
        corpus: &Corpus,
        cleansing: &CleansingConfig,
        boost: &BoostConfig,
    ) -> Result<(Self, EmailMatrices), TextprepError> {
        cleansing.validate()?;
        boost.validate()?;
        let subject_counts = build_term_matrix(corpus, Field::Subject, cleansing);
        let body_counts = build_term_matrix(corpus, Field::Body, cleansing);
        let subject_idf = inverse_document_frequency(&subject_counts);
        let body_idf = inverse_document_frequency(&body_counts);
        let boost_terms = subject_terms(corpus, cleansing);
        let subject = subject_counts.map_columns(|j| subject_idf[j]).normalize_rows();
        let body = boost_columns(
            &body_counts.map_columns(|j| body_idf[j]),
            &boost_terms,
            boost.subject_term_weight,
        );
        let model = Self {
            cleansing: cleansing.clone(),
            boost: *boost,
            subject_vocabulary: subject.vocabulary.clone(),
            subject_idf,
            body_vocabulary: body.vocabulary.clone(),
            body_idf,
            boost_terms,
        };
        Ok((model, EmailMatrices { subject, body }))
    }

    /// Vectorizes one email; out-of-vocabulary terms are dropped.
    pub fn vectorize(&self, email: &Email) -> (SparseVec, SparseVec) {
        let subject = self.vectorize_field(&email.subject, &self.subject_vocabulary, &self.subject_idf, false);
        let body = self.vectorize_field(&email.body, &self.body_vocabulary, &self.body_idf, true);
        (subject, body)
    }

    fn vectorize_field(&self, text: &str, vocabulary: &[String], idf: &[f64], boosted: bool) -> SparseVec {
        let pairs = cleanse(text, &self.cleansing).into_iter().filter_map(|token| {
            let j = vocabulary.binary_search(&token).ok()?;
            let factor = if boosted && self.boost_terms.contains(&token) {
                self.boost.subject_term_weight
            } else {
                1.0
            };
            Some((j, idf[j] * factor))
        });
        SparseVec::from_pairs(vocabulary.len(), pairs).normalized()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{read_csv, CsvSchema};
    use proptest::prelude::*;

    fn corpus(rows: &[(&str, &str)]) -> Corpus {
        let mut text = String::from("EmailID,Sender,Receiver,Subject,Timestamp,Body\n");
        for (i, (subject, body)) in rows.iter().enumerate() {
            text.push_str(&format!("{},a@x.org,b@y.org,\"{subject}\",2016-03-29 10:34:00,\"{body}\"\n", i + 1));
        }
        read_csv(text.as_bytes(), &CsvSchema::default(), "test").unwrap()
    }

    #[test]
    fn cleanse_meeting_question() {
        let tokens = cleanse("What time is the meeting today?", &CleansingConfig::default());
        assert_eq!(tokens, vec!["time", "meeting", "today"]);
    }

    #[test]
    fn cleanse_empty_and_numbers() {
        let cfg = CleansingConfig::default();
        assert!(cleanse("", &cfg).is_empty());
        assert!(cleanse("2016 !!!", &cfg).is_empty());
    }

    #[test]
    fn cleanse_contractions_and_digits() {
        let cfg = CleansingConfig::default();
        assert_eq!(cleanse("I don't know, 11am works", &cfg), vec!["know", "works"]);
        assert_eq!(cleanse("http://lamsade.dauphine.fr/~x/", &cfg), vec!["http", "lamsade", "dauphine", "fr"]);
    }

    #[test]
    fn cleanse_flags_off() {
        let cfg = CleansingConfig {
            stopwords: BTreeSet::new(),
            remove_numbers: false,
            remove_punctuation: false,
            lowercase: false,
            min_token_length: 1,
        };
        assert_eq!(cleanse("Room 12!", &cfg), vec!["Room", "12!"]);
    }

    #[test]
    fn zero_min_token_length_rejected() {
        let cfg = CleansingConfig { min_token_length: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn raw_counts() {
        let c = corpus(&[("", "meeting meeting room"), ("", "meeting agenda")]);
        let m = build_term_matrix(&c, Field::Body, &CleansingConfig::default());
        assert_eq!(m.vocabulary, vec!["agenda", "meeting", "room"]);
        assert_eq!(m.weight(1, "meeting"), 2.0);
        assert_eq!(m.weight(1, "room"), 1.0);
        assert_eq!(m.weight(2, "meeting"), 1.0);
        assert_eq!(m.weight(2, "agenda"), 1.0);
        assert_eq!(m.weight(1, "agenda"), 0.0);
    }

    #[test]
    fn empty_body_is_zero_row() {
        let c = corpus(&[("", ""), ("", "agenda")]);
        let m = build_term_matrix(&c, Field::Body, &CleansingConfig::default());
        assert!(m.rows[0].is_zero());
    }

    #[test]
    fn short_tokens_filtered() {
        let c = corpus(&[("", "a a a")]);
        let cfg = CleansingConfig { stopwords: BTreeSet::new(), ..Default::default() };
        assert!(build_term_matrix(&c, Field::Body, &cfg).vocabulary.is_empty());
    }

    #[test]
    fn tfidf_two_documents() {
        let c = corpus(&[("", "meeting meeting room"), ("", "meeting agenda")]);
        let counts = build_term_matrix(&c, Field::Body, &CleansingConfig::default());
        let idf = inverse_document_frequency(&counts);
        let weighted = counts.map_columns(|j| idf[j]);
        assert_eq!(weighted.weight(1, "meeting"), 0.0);
        assert!((weighted.weight(1, "room") - 2f64.ln()).abs() < 1e-12);
        let m = tfidf_normalize(&counts);
        assert!((m.weight(1, "room") - 1.0).abs() < 1e-9);
        assert_eq!(m.weight(1, "meeting"), 0.0);
        assert!((m.weight(2, "agenda") - 1.0).abs() < 1e-9);
    }

    #[test]
    fn boost_weight_one_is_noop() {
        let c = corpus(&[("meeting", "meeting room plan"), ("agenda", "agenda room list")]);
        let cfg = CleansingConfig::default();
        let m = tfidf_normalize(&build_term_matrix(&c, Field::Body, &cfg));
        let boosted = apply_subject_boost(&m, &c, &BoostConfig { subject_term_weight: 1.0 }, &cfg);
        for (a, b) in m.rows.iter().zip(&boosted.rows) {
            for (&(i, x), &(j, y)) in a.entries.iter().zip(&b.entries) {
                assert_eq!(i, j);
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boost_two_document_hand_computation() {
        // doc1 body: meeting room plan; doc2 body: agenda room list; subjects: meeting / agenda.
        // idf: room -> ln(2/2) = 0, others ln 2. Pre-boost doc1 = (meeting ln2, plan ln2).
        // Boost x2 on {meeting, agenda}: doc1 = (2 ln2, ln2) -> (2, 1)/sqrt(5).
        let c = corpus(&[("meeting", "meeting room plan"), ("agenda", "agenda room list")]);
        let cfg = CleansingConfig::default();
        let m = tfidf_normalize(&build_term_matrix(&c, Field::Body, &cfg));
        let boosted = apply_subject_boost(&m, &c, &BoostConfig { subject_term_weight: 2.0 }, &cfg);
        let s5 = 5f64.sqrt();
        assert!((boosted.weight(1, "meeting") - 2.0 / s5).abs() < 1e-9);
        assert!((boosted.weight(1, "plan") - 1.0 / s5).abs() < 1e-9);
        assert!((boosted.weight(2, "agenda") - 2.0 / s5).abs() < 1e-9);
        assert!((boosted.weight(2, "list") - 1.0 / s5).abs() < 1e-9);
        assert_eq!(boosted.weight(1, "room"), 0.0);
        // Before boosting the two terms tie; the subject term now ranks first.
        assert!((m.weight(1, "meeting") - m.weight(1, "plan")).abs() < 1e-12);
    }

    #[test]
    fn model_vectorize_matches_matrices() {
        let c = corpus(&[
            ("meeting", "meeting room plan today"),
            ("agenda", "agenda room list"),
            ("mission demand", "please find attached my mission demand"),
        ]);
        let (model, matrices) = TextModel::fit(&c, &CleansingConfig::default(), &BoostConfig::default()).unwrap();
        for (i, email) in c.emails.iter().enumerate() {
            let (s, b) = model.vectorize(email);
            assert!(s.euclidean(&matrices.subject.rows[i]) < 1e-12);
            assert!(b.euclidean(&matrices.body.rows[i]) < 1e-12);
        }
    }

    #[test]
    fn triplets_csv() {
        let c = corpus(&[("", "meeting meeting room"), ("", "meeting agenda")]);
        let m = build_term_matrix(&c, Field::Body, &CleansingConfig::default());
        let mut buf = Vec::new();
        m.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "doc_id,term,weight\n1,meeting,2\n1,room,1\n2,agenda,1\n2,meeting,1\n");
    }

    proptest! {
        #[test]
        fn normalized_rows_have_unit_norm(bodies in proptest::collection::vec("[a-e ]{0,30}", 1..8)) {
            let rows: Vec<(&str, &str)> = bodies.iter().map(|b| ("", b.as_str())).collect();
            let c = corpus(&rows);
            let cfg = CleansingConfig { stopwords: BTreeSet::new(), min_token_length: 1, ..Default::default() };
            let m = tfidf_normalize(&build_term_matrix(&c, Field::Body, &cfg));
            for row in &m.rows {
                let norm = row.norm();
                prop_assert!(row.is_zero() || (norm - 1.0).abs() < 1e-9);
                prop_assert!(row.entries.iter().all(|&(_, w)| w >= 0.0));
            }
            for a in &m.rows {
                for b in &m.rows {
                    let d = a.euclidean(b);
                    prop_assert!((0.0..=2f64.sqrt() + 1e-12).contains(&d));
                }
            }
        }

        #[test]
        fn cleansing_is_deterministic(text in "\\PC{0,60}") {
            let cfg = CleansingConfig::default();
            prop_assert_eq!(cleanse(&text, &cfg), cleanse(&text, &cfg));
        }
    }
}
