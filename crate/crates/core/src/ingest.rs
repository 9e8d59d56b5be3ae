//! Email corpus ingestion from CSV exports and RFC 4155 mbox files.
//!
//! Threading metadata (`In-Reply-To`, `References`, `Message-ID`, ...) is
//! never carried into an [`Email`]: every message is treated on its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use base64::Engine;
use chrono::{DateTime, FixedOffset, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type EmailId = u64;

/// Timestamp layout used in CSV exports.
pub const CSV_TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("corpus error: duplicate email ids {0:?}")]
    DuplicateIds(Vec<EmailId>),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid email {id}: {message}")]
    InvalidEmail { id: EmailId, message: String },
    #[error("corpus error: empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Email {
    pub id: EmailId,
    pub sender: String,
    pub receivers: Vec<String>,
    pub subject: String,
    pub body: String,
    pub timestamp: DateTime<FixedOffset>,
}

impl Email {
    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |message: String| IngestError::InvalidEmail { id: self.id, message };
        if self.id == 0 {
            return Err(invalid("id must be positive".into()));
        }
        if !is_plausible_address(&self.sender) {
            return Err(invalid(format!("implausible sender address `{}`", self.sender)));
        }
        if self.receivers.is_empty() {
            return Err(invalid("no receivers".into()));
        }
        if let Some(bad) = self.receivers.iter().find(|r| r.trim().is_empty()) {
            return Err(invalid(format!("empty receiver `{bad}`")));
        }
        check_timestamp_range(&self.timestamp).map_err(invalid)?;
        Ok(())
    }

    /// Sender and receivers, lowercased.
    pub fn participants(&self) -> BTreeSet<String> {
        std::iter::once(&self.sender)
            .chain(self.receivers.iter())
            .map(|a| a.trim().to_lowercase())
            .collect()
    }
}

/// An address is plausible when it contains exactly one `@`.
pub fn is_plausible_address(address: &str) -> bool {
    let address = address.trim();
    !address.is_empty() && address.matches('@').count() == 1
}

fn check_timestamp_range(ts: &DateTime<FixedOffset>) -> Result<(), String> {
    let lower = Utc.with_ymd_and_hms(1970, 1, 1, 0, 0, 0).unwrap();
    let upper = Utc.with_ymd_and_hms(2100, 1, 1, 0, 0, 0).unwrap();
    let utc = ts.with_timezone(&Utc);
    if utc < lower || utc >= upper {
        return Err(format!("timestamp {ts} outside [1970-01-01, 2100-01-01)"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub emails: Vec<Email>,
    pub source_descriptor: String,
    /// Non-fatal problems met while reading the source (e.g. skipped messages).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Corpus {
    /// Builds a corpus, enforcing id uniqueness, per-email validity and non-emptiness.
    pub fn new(emails: Vec<Email>, source_descriptor: impl Into<String>) -> Result<Self, IngestError> {
        if emails.is_empty() {
            return Err(IngestError::EmptyCorpus);
        }
        let mut seen = BTreeSet::new();
        let mut duplicates = BTreeSet::new();
        for email in &emails {
            if !seen.insert(email.id) {
                duplicates.insert(email.id);
            }
        }
        if !duplicates.is_empty() {
            return Err(IngestError::DuplicateIds(duplicates.into_iter().collect()));
        }
        for email in &emails {
            email.validate()?;
        }
        Ok(Self { emails, source_descriptor: source_descriptor.into(), warnings: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.emails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.emails.is_empty()
    }

    pub fn get(&self, id: EmailId) -> Option<&Email> {
        self.emails.iter().find(|e| e.id == id)
    }

    pub fn ids(&self) -> Vec<EmailId> {
        self.emails.iter().map(|e| e.id).collect()
    }

    /// Index of every email id in corpus order.
    pub fn index(&self) -> BTreeMap<EmailId, usize> {
        self.emails.iter().enumerate().map(|(i, e)| (e.id, i)).collect()
    }

    /// A corpus holding only the given ids, in corpus order.
    pub fn subset(&self, ids: &BTreeSet<EmailId>) -> Result<Self, IngestError> {
        let emails = self.emails.iter().filter(|e| ids.contains(&e.id)).cloned().collect();
        let mut corpus = Corpus::new(emails, format!("{} (subset)", self.source_descriptor))?;
        corpus.warnings = self.warnings.clone();
        Ok(corpus)
    }

    /// SHA-256 over the canonical CSV serialization.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut buf = Vec::new();
        write_csv(self, &CsvSchema::default(), &mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Column names of a CSV export plus the receiver delimiter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSchema {
    pub id: String,
    pub sender: String,
    pub receiver: String,
    pub subject: String,
    pub timestamp: String,
    pub body: String,
    pub receiver_delimiter: char,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            id: "EmailID".into(),
            sender: "Sender".into(),
            receiver: "Receiver".into(),
            subject: "Subject".into(),
            timestamp: "Timestamp".into(),
            body: "Body".into(),
            receiver_delimiter: ';',
        }
    }
}

/// Parses `YYYY-MM-DD HH:MM:SS` (UTC), falling back to RFC 3339 and naive ISO-8601.
pub fn parse_timestamp(raw: &str) -> Option<DateTime<FixedOffset>> {
    let raw = raw.trim();
    let utc = FixedOffset::east_opt(0).unwrap();
    if let Ok(naive) = NaiveDateTime::parse_from_str(raw, CSV_TIMESTAMP_FORMAT) {
        return Some(utc.from_utc_datetime(&naive));
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(utc.from_utc_datetime(&naive));
        }
    }
    None
}

/// Inverse of [`parse_timestamp`]: UTC timestamps use the CSV layout, others RFC 3339.
pub fn format_timestamp(ts: &DateTime<FixedOffset>) -> String {
    if ts.offset().local_minus_utc() == 0 {
        ts.format(CSV_TIMESTAMP_FORMAT).to_string()
    } else {
        ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, false)
    }
}

pub fn parse_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Corpus, IngestError> {
    let path = path.as_ref();
    let file = fs::File::open(path)?;
    read_csv(file, schema, path.display().to_string())
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: &CsvSchema,
    source_descriptor: impl Into<String>,
) -> Result<Corpus, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let id_col = column(&schema.id)?;
    let sender_col = column(&schema.sender)?;
    let receiver_col = column(&schema.receiver)?;
    let subject_col = column(&schema.subject)?;
    let timestamp_col = column(&schema.timestamp)?;
    let body_col = column(&schema.body)?;

    let mut emails = Vec::new();
    for (index, record) in rdr.records().enumerate() {
        let row = index + 1;
        let record = record?;
        let field = |col: usize| record.get(col).unwrap_or("");
        let row_err = |message: String| IngestError::Row { row, message };
        let id: EmailId = field(id_col)
            .trim()
            .parse()
            .map_err(|_| row_err(format!("unparseable id `{}`", field(id_col))))?;
        let timestamp = parse_timestamp(field(timestamp_col))
            .ok_or_else(|| row_err(format!("unparseable timestamp `{}`", field(timestamp_col))))?;
        let receivers = field(receiver_col)
            .split(schema.receiver_delimiter)
            .map(str::trim)
            .filter(|r| !r.is_empty())
            .map(String::from)
            .collect();
        emails.push(Email {
            id,
            sender: field(sender_col).trim().to_string(),
            receivers,
            subject: field(subject_col).to_string(),
            body: field(body_col).to_string(),
            timestamp,
        });
    }
    Corpus::new(emails, source_descriptor)
}

/// Writes the corpus with the schema's column names, in corpus order.
pub fn write_csv<W: Write>(corpus: &Corpus, schema: &CsvSchema, writer: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        &schema.id,
        &schema.sender,
        &schema.receiver,
        &schema.subject,
        &schema.timestamp,
        &schema.body,
    ])?;
    let delimiter = schema.receiver_delimiter.to_string();
    for email in &corpus.emails {
        wtr.write_record([
            email.id.to_string(),
            email.sender.clone(),
            email.receivers.join(&delimiter),
            email.subject.clone(),
            format_timestamp(&email.timestamp),
            email.body.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_mbox(path: impl AsRef<Path>) -> Result<Corpus, IngestError> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    read_mbox(&String::from_utf8_lossy(&bytes), path.display().to_string())
}

/// Splits an mbox into messages and parses each; malformed messages are
/// skipped and counted in [`Corpus::warnings`]. Ids are assigned 1, 2, ...
/// over the accepted messages in file order.
pub fn read_mbox(text: &str, source_descriptor: impl Into<String>) -> Result<Corpus, IngestError> {
    let mut emails = Vec::new();
    let mut warnings = Vec::new();
    for (index, raw) in split_mbox(text).into_iter().enumerate() {
        let next_id = emails.len() as EmailId + 1;
        match parse_message(&raw, next_id) {
            Ok(email) => emails.push(email),
            Err(reason) => warnings.push(format!("message {} skipped: {reason}", index + 1)),
        }
    }
    let mut corpus = Corpus::new(emails, source_descriptor)?;
    corpus.warnings = warnings;
    Ok(corpus)
}

fn split_mbox(text: &str) -> Vec<String> {
    let mut messages = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.starts_with("From ") {
            if let Some(lines) = current.take() {
                messages.push(lines.join("\n"));
            }
            current = Some(Vec::new());
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    if let Some(lines) = current {
        messages.push(lines.join("\n"));
    }
    messages
}

struct RawMessage {
    headers: Vec<(String, String)>,
    body: String,
}

impl RawMessage {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

fn split_headers(raw: &str) -> Result<RawMessage, String> {
    let Some((head, body)) = raw.split_once("\n\n") else {
        return Err("no blank line after the header block (truncated message?)".into());
    };
    let mut headers: Vec<(String, String)> = Vec::new();
    for line in head.lines() {
        if line.starts_with(' ') || line.starts_with('\t') {
            match headers.last_mut() {
                Some((_, value)) => {
                    value.push(' ');
                    value.push_str(line.trim());
                }
                None => return Err("continuation line before any header".into()),
            }
            continue;
        }
        let Some((name, value)) = line.split_once(':') else {
            return Err(format!("malformed header line `{line}`"));
        };
        if name.is_empty() || name.contains(' ') {
            return Err(format!("malformed header name `{name}`"));
        }
        headers.push((name.to_string(), value.trim().to_string()));
    }
    Ok(RawMessage { headers, body: body.to_string() })
}

fn parse_message(raw: &str, id: EmailId) -> Result<Email, String> {
    let message = split_headers(raw)?;
    let sender = message
        .header("From")
        .and_then(|v| parse_address_list(v).into_iter().next())
        .ok_or("missing From header")?;
    let mut receivers = Vec::new();
    for name in ["To", "Cc"] {
        if let Some(value) = message.header(name) {
            receivers.extend(parse_address_list(value));
        }
    }
    if receivers.is_empty() {
        return Err("missing To header".into());
    }
    let date = message.header("Date").ok_or("missing Date header")?;
    let timestamp = DateTime::parse_from_rfc2822(date.trim())
        .map_err(|e| format!("unparseable Date `{date}`: {e}"))?;
    let subject = message.header("Subject").unwrap_or("").to_string();
    let body = extract_text_body(&message);
    let email = Email { id, sender, receivers, subject, body, timestamp };
    email.validate().map_err(|e| e.to_string())?;
    Ok(email)
}

/// Pulls bare addresses out of `Name <addr>, addr2` lists.
fn parse_address_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .filter_map(|part| {
            let part = part.trim();
            let addr = match (part.find('<'), part.rfind('>')) {
                (Some(start), Some(end)) if start < end => &part[start + 1..end],
                _ => part,
            };
            let addr = addr.trim().trim_matches('"');
            (!addr.is_empty()).then(|| addr.to_string())
        })
        .collect()
}

fn header_param(value: &str, param: &str) -> Option<String> {
    value.split(';').skip(1).find_map(|p| {
        let (k, v) = p.trim().split_once('=')?;
        k.trim().eq_ignore_ascii_case(param).then(|| v.trim().trim_matches('"').to_string())
    })
}

fn extract_text_body(message: &RawMessage) -> String {
    let content_type = message.header("Content-Type").unwrap_or("text/plain").to_string();
    let encoding = message.header("Content-Transfer-Encoding").unwrap_or("7bit").to_string();
    text_of_part(&content_type, &encoding, &message.body)
}

fn text_of_part(content_type: &str, encoding: &str, body: &str) -> String {
    let mime = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if mime.starts_with("multipart/") {
        let Some(boundary) = header_param(content_type, "boundary") else {
            return unescape_from_lines(body);
        };
        let parts = split_multipart(body, &boundary);
        let mut html = None;
        for part in parts {
            let Ok(sub) = split_headers(&part) else { continue };
            let ct = sub.header("Content-Type").unwrap_or("text/plain").to_string();
            let enc = sub.header("Content-Transfer-Encoding").unwrap_or("7bit").to_string();
            let sub_mime = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
            if sub_mime == "text/plain" || sub_mime.starts_with("multipart/") {
                return text_of_part(&ct, &enc, &sub.body);
            }
            if sub_mime == "text/html" && html.is_none() {
                html = Some(text_of_part(&ct, &enc, &sub.body));
            }
        }
        return html.unwrap_or_default();
    }
    let decoded = decode_transfer(encoding, &unescape_from_lines(body));
    if mime == "text/html" {
        strip_tags(&decoded)
    } else {
        decoded.trim_end().to_string()
    }
}

fn split_multipart(body: &str, boundary: &str) -> Vec<String> {
    let delimiter = format!("--{boundary}");
    let mut parts = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in body.lines() {
        if line.starts_with(&delimiter) {
            if let Some(lines) = current.take() {
                parts.push(lines.join("\n"));
            }
            if line.trim_end() == format!("{delimiter}--") {
                break;
            }
            current = Some(Vec::new());
        } else if let Some(lines) = current.as_mut() {
            lines.push(line);
        }
    }
    parts
}

/// mboxrd quoting: `>From ` lines lose one leading `>`.
fn unescape_from_lines(body: &str) -> String {
    body.lines()
        .map(|line| {
            let stripped = line.trim_start_matches('>');
            if line.starts_with('>') && stripped.starts_with("From ") {
                &line[1..]
            } else {
                line
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn decode_transfer(encoding: &str, body: &str) -> String {
    match encoding.trim().to_ascii_lowercase().as_str() {
        "base64" => {
            let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
            base64::engine::general_purpose::STANDARD
                .decode(compact)
                .map(|bytes| String::from_utf8_lossy(&bytes).into_owned())
                .unwrap_or_else(|_| body.to_string())
        }
        "quoted-printable" => decode_quoted_printable(body),
        _ => body.to_string(),
    }
}

fn decode_quoted_printable(body: &str) -> String {
    let mut out = Vec::with_capacity(body.len());
    let lines: Vec<&str> = body.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        let line = line.trim_end();
        let (content, soft_break) = match line.strip_suffix('=') {
            Some(rest) => (rest, true),
            None => (line, false),
        };
        let bytes = content.as_bytes();
        let mut j = 0;
        while j < bytes.len() {
            if bytes[j] == b'=' && j + 2 < bytes.len() {
                let hex = |b: u8| (b as char).to_digit(16);
                if let (Some(hi), Some(lo)) = (hex(bytes[j + 1]), hex(bytes[j + 2])) {
                    out.push((hi * 16 + lo) as u8);
                    j += 3;
                    continue;
                }
            }
            out.push(bytes[j]);
            j += 1;
        }
        if !soft_break && i + 1 < lines.len() {
            out.push(b'\n');
        }
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Removes markup tags and collapses the leftover whitespace.
pub fn strip_tags(html: &str) -> String {
    let mut out = String::with_capacity(html.len());
    let mut in_tag = false;
    for c in html.chars() {
        match c {
            '<' => {
                in_tag = true;
                out.push(' ');
            }
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    let out = out.replace("&nbsp;", " ").replace("&amp;", "&").replace("&lt;", "<").replace("&gt;", ">");
    out.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "EmailID,Sender,Receiver,Subject,Timestamp,Body\n";

    fn corpus_from(text: &str) -> Result<Corpus, IngestError> {
        read_csv(text.as_bytes(), &CsvSchema::default(), "test")
    }

    #[test]
    fn single_row() {
        let corpus = corpus_from(&format!("{HEADER}1,a@x.org,b@y.org,hi,2016-03-29 10:34:00,hello\n")).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.emails[0].id, 1);
        assert_eq!(corpus.emails[0].timestamp.to_rfc3339(), "2016-03-29T10:34:00+00:00");
    }

    #[test]
    fn duplicate_id_is_named() {
        let text = format!(
            "{HEADER}3,a@x.org,b@y.org,s,2016-03-29 10:34:00,x\n3,a@x.org,b@y.org,s,2016-03-29 10:35:00,y\n"
        );
        match corpus_from(&text) {
            Err(IngestError::DuplicateIds(ids)) => assert_eq!(ids, vec![3]),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_named() {
        let text = "EmailID,Sender,Receiver,Subject,Body\n1,a@x.org,b@y.org,s,x\n";
        match corpus_from(text) {
            Err(IngestError::MissingColumn(col)) => assert_eq!(col, "Timestamp"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn bad_timestamp_reports_row() {
        let text = format!(
            "{HEADER}1,a@x.org,b@y.org,s,2016-03-29 10:34:00,x\n2,a@x.org,b@y.org,s,22016-06-28 15:01:00,y\n"
        );
        match corpus_from(&text) {
            Err(IngestError::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn receivers_split_on_delimiter() {
        let text = format!("{HEADER}1,a@x.org,b@y.org; c@z.org,s,2016-03-29T10:34:00+02:00,x\n");
        let corpus = corpus_from(&text).unwrap();
        assert_eq!(corpus.emails[0].receivers, vec!["b@y.org", "c@z.org"]);
        assert_eq!(corpus.emails[0].timestamp.offset().local_minus_utc(), 7200);
    }

    #[test]
    fn sender_needs_one_at_sign() {
        let text = format!("{HEADER}1,nobody,b@y.org,s,2016-03-29 10:34:00,x\n");
        assert!(matches!(corpus_from(&text), Err(IngestError::InvalidEmail { id: 1, .. })));
    }

    #[test]
    fn timestamp_range_enforced() {
        let text = format!("{HEADER}1,a@x.org,b@y.org,s,2100-01-01 00:00:00,x\n");
        assert!(matches!(corpus_from(&text), Err(IngestError::InvalidEmail { .. })));
    }

    #[test]
    fn empty_csv_is_empty_corpus() {
        assert!(matches!(corpus_from(HEADER), Err(IngestError::EmptyCorpus)));
    }

    fn mbox_message(from: &str, subject: &str, date: &str, body: &str) -> String {
        format!(
            "From {from} Sat Jan  3 01:05:34 1996\nFrom: Someone <{from}>\nTo: b@y.org\nSubject: {subject}\nDate: {date}\nMessage-ID: <abc@x>\nIn-Reply-To: <parent@x>\nReferences: <root@x> <parent@x>\n\n{body}\n\n"
        )
    }

    #[test]
    fn empty_mbox_is_error() {
        assert!(matches!(read_mbox("", "empty"), Err(IngestError::EmptyCorpus)));
    }

    #[test]
    fn mbox_ids_are_sequential() {
        let text: String = (0..3)
            .map(|i| mbox_message("a@x.org", &format!("s{i}"), "Tue, 29 Mar 2016 10:34:00 +0000", "hello"))
            .collect();
        let corpus = read_mbox(&text, "three").unwrap();
        assert_eq!(corpus.ids(), vec![1, 2, 3]);
        assert!(corpus.warnings.is_empty());
        let serialized = serde_json::to_string(&corpus).unwrap();
        assert!(!serialized.contains("parent@x"));
        assert!(!serialized.contains("In-Reply-To"));
    }

    #[test]
    fn truncated_message_is_skipped() {
        let good = mbox_message("a@x.org", "one", "Tue, 29 Mar 2016 10:34:00 +0000", "hello");
        let truncated = "From c@x.org Sat Jan  3 01:05:34 1996\nFrom: c@x.org\nTo: b@y.org\nSubj\n";
        let corpus = read_mbox(&format!("{good}{truncated}{good}"), "mixed").unwrap();
        assert_eq!(corpus.ids(), vec![1, 2]);
        assert_eq!(corpus.warnings.len(), 1);
    }

    #[test]
    fn mbox_from_quoting_and_qp() {
        let text = "From a@x.org Sat Jan  3 01:05:34 1996\nFrom: a@x.org\nTo: \"B\" <b@y.org>, c@z.org\nDate: Tue, 29 Mar 2016 10:34:00 +0200\nContent-Transfer-Encoding: quoted-printable\n\nCaf=C3=A9 meeting =\ntoday\n>From the desk\n";
        let corpus = read_mbox(text, "qp").unwrap();
        let email = &corpus.emails[0];
        assert_eq!(email.receivers, vec!["b@y.org", "c@z.org"]);
        assert_eq!(email.body, "Café meeting today\nFrom the desk");
    }

    #[test]
    fn html_part_is_stripped() {
        let text = "From a@x.org Sat Jan  3 01:05:34 1996\nFrom: a@x.org\nTo: b@y.org\nDate: Tue, 29 Mar 2016 10:34:00 +0000\nContent-Type: multipart/alternative; boundary=\"XX\"\n\n--XX\nContent-Type: text/html\n\n<p>Hello <b>there</b></p>\n--XX--\n";
        let corpus = read_mbox(text, "html").unwrap();
        assert_eq!(corpus.emails[0].body, "Hello there");
    }
}
