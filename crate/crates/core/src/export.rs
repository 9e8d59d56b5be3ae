//! Event logs (CSV and XES) and directly-follows graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};

use chrono::{DateTime, FixedOffset, SecondsFormat};
use quick_xml::events::Event;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::EmailId;
use crate::run::{Run, RunError};

pub const CSV_HEADER: [&str; 6] = ["case_id", "activity", "timestamp", "resource", "lifecycle", "email_id"];
pub const LIFECYCLE_COMPLETE: &str = "complete";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("unlabeled activity clusters: {0:?}")]
    Unlabeled(Vec<usize>),
    #[error("topic cluster {0} has no emails to export")]
    EmptySelection(usize),
    #[error("event log csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("event log row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("several topics are fully labeled ({0:?}); choose one")]
    AmbiguousTopic(Vec<usize>),
    #[error("event log is empty")]
    EmptyLog,
    #[error("invalid XES: {0}")]
    InvalidXes(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub case_id: usize,
    pub activity: String,
    pub timestamp: DateTime<FixedOffset>,
    pub resource: String,
    pub lifecycle: String,
    pub email_id: EmailId,
    /// Recipients of the email; written to XES only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub receivers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLog {
    pub topic_cluster_id: usize,
    /// Sorted by (case_id, timestamp, email_id).
    pub records: Vec<EventRecord>,
}

impl EventLog {
    pub fn cases(&self) -> BTreeMap<usize, Vec<&EventRecord>> {
        let mut out: BTreeMap<usize, Vec<&EventRecord>> = BTreeMap::new();
        for r in &self.records {
            out.entry(r.case_id).or_default().push(r);
        }
        out
    }

    fn sort(&mut self) {
        self.records.sort_by_key(|r| (r.case_id, r.timestamp, r.email_id));
    }
}

/// One event per email of the topic cluster: case = process instance,
/// activity = label of the email's activity cluster, resource = sender.
pub fn build_event_log(run: &Run, topic_id: usize) -> Result<EventLog, ExportError> {
    let topic = run.topic(topic_id)?;
    if topic.email_ids.is_empty() {
        return Err(ExportError::EmptySelection(topic_id));
    }
    let instances = run.instance_phase()?;
    let activities = run.activity_phase()?;
    let own: Vec<_> = activities.all().filter(|a| a.topic_cluster_id == topic_id).cloned().collect();
    let unlabeled = run.labels.unlabeled(&own);
    if !unlabeled.is_empty() {
        return Err(ExportError::Unlabeled(unlabeled));
    }
    let labels = run.labels.email_labels(&own);
    let emails = run.emails_by_id();
    let mut records = Vec::new();
    for inst in instances.all().filter(|i| i.topic_cluster_id == topic_id) {
        for id in &inst.email_ids {
            let email = emails[id];
            records.push(EventRecord {
                case_id: inst.instance_id,
                activity: labels[id].clone(),
                timestamp: email.timestamp,
                resource: email.sender.clone(),
                lifecycle: LIFECYCLE_COMPLETE.to_string(),
                email_id: *id,
                receivers: email.receivers.clone(),
            });
        }
    }
    let mut log = EventLog { topic_cluster_id: topic_id, records };
    log.sort();
    Ok(log)
}

pub fn format_event_time(ts: &DateTime<FixedOffset>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

pub fn write_csv<W: Write>(log: &EventLog, writer: W) -> Result<(), ExportError> {
    let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for r in &log.records {
        wtr.write_record([
            r.case_id.to_string(),
            r.activity.clone(),
            format_event_time(&r.timestamp),
            r.resource.clone(),
            r.lifecycle.clone(),
            r.email_id.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a log written by [`write_csv`]. Receivers are not part of the CSV.
pub fn read_csv<R: Read>(reader: R, topic_cluster_id: usize) -> Result<EventLog, ExportError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != CSV_HEADER {
        return Err(ExportError::Row { row: 0, message: format!("unexpected header {headers:?}") });
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let bad = |message: &str| ExportError::Row { row, message: message.to_string() };
        records.push(EventRecord {
            case_id: rec[0].parse().map_err(|_| bad("case_id is not an integer"))?,
            activity: rec[1].to_string(),
            timestamp: DateTime::parse_from_rfc3339(&rec[2]).map_err(|_| bad("timestamp is not RFC 3339"))?,
            resource: rec[3].to_string(),
            lifecycle: rec[4].to_string(),
            email_id: rec[5].parse().map_err(|_| bad("email_id is not an integer"))?,
            receivers: Vec::new(),
        });
    }
    Ok(EventLog { topic_cluster_id, records })
}

fn escape(text: &str) -> String {
    quick_xml::escape::escape(text).into_owned()
}

/// XES 1.0 document with one trace per case.
pub fn write_xes(log: &EventLog) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    x.push_str("<log xes.version=\"1.0\" xes.features=\"\" xmlns=\"http://www.xes-standard.org/\">\n");
    for (name, prefix) in [("Concept", "concept"), ("Time", "time"), ("Organizational", "org"), ("Lifecycle", "lifecycle")] {
        let _ = writeln!(
            x,
            "  <extension name=\"{name}\" prefix=\"{prefix}\" uri=\"http://www.xes-standard.org/{prefix}.xesext\"/>"
        );
    }
    x.push_str("  <global scope=\"trace\">\n    <string key=\"concept:name\" value=\"\"/>\n  </global>\n");
    x.push_str("  <global scope=\"event\">\n");
    x.push_str("    <string key=\"concept:name\" value=\"\"/>\n");
    x.push_str("    <date key=\"time:timestamp\" value=\"1970-01-01T00:00:00Z\"/>\n");
    x.push_str("    <string key=\"lifecycle:transition\" value=\"complete\"/>\n");
    x.push_str("  </global>\n");
    x.push_str("  <classifier name=\"Activity\" keys=\"concept:name\"/>\n");
    let _ = writeln!(x, "  <string key=\"concept:name\" value=\"topic {}\"/>", log.topic_cluster_id);
    for (case, events) in log.cases() {
        x.push_str("  <trace>\n");
        let _ = writeln!(x, "    <string key=\"concept:name\" value=\"{case}\"/>");
        for e in events {
            x.push_str("    <event>\n");
            let _ = writeln!(x, "      <string key=\"concept:name\" value=\"{}\"/>", escape(&e.activity));
            let _ = writeln!(x, "      <date key=\"time:timestamp\" value=\"{}\"/>", format_event_time(&e.timestamp));
            let _ = writeln!(x, "      <string key=\"org:resource\" value=\"{}\"/>", escape(&e.resource));
            let _ = writeln!(x, "      <string key=\"lifecycle:transition\" value=\"{}\"/>", escape(&e.lifecycle));
            let _ = writeln!(x, "      <int key=\"email:id\" value=\"{}\"/>", e.email_id);
            if !e.receivers.is_empty() {
                let _ = writeln!(x, "      <string key=\"email:receivers\" value=\"{}\"/>", escape(&e.receivers.join(";")));
            }
            x.push_str("    </event>\n");
        }
        x.push_str("  </trace>\n");
    }
    x.push_str("</log>\n");
    x
}

/// Summary of a structurally valid XES document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XesSummary {
    pub traces: usize,
    pub events: usize,
    pub lifecycles: BTreeSet<String>,
}

const ATTRIBUTE_TAGS: [&str; 8] = ["string", "date", "int", "float", "boolean", "id", "list", "container"];

/// Checks the XES 1.0 structure: the log root and its version, declared
/// extensions for every prefixed key, `global`/`classifier` placement,
/// trace/event nesting, typed attributes with `key` and well-formed values.
pub fn validate_xes(text: &str) -> Result<XesSummary, ExportError> {
    let invalid = |m: String| ExportError::InvalidXes(m);
    let mut reader = quick_xml::Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<String> = Vec::new();
    let mut prefixes: BTreeSet<String> = BTreeSet::new();
    let mut summary = XesSummary { traces: 0, events: 0, lifecycles: BTreeSet::new() };
    let mut saw_root = false;
    let mut seen_trace = false;
    loop {
        let event = reader.read_event().map_err(|e| invalid(format!("malformed XML: {e}")))?;
        let (start, empty) = match &event {
            Event::Start(s) => (Some(s.clone()), false),
            Event::Empty(s) => (Some(s.clone()), true),
            Event::End(_) => {
                stack.pop();
                continue;
            }
            Event::Eof => break,
            Event::Text(t) if !t.trim().is_empty() => {
                return Err(invalid("unexpected text content".into()));
            }
            _ => continue,
        };
        let Some(start) = start else { continue };
        let name = start.name().into_inner().to_string();
        let mut attrs = BTreeMap::new();
        for a in start.attributes() {
            let a = a.map_err(|e| invalid(format!("bad attribute: {e}")))?;
            let value = a.normalized_value(quick_xml::XmlVersion::Implicit1_0).map_err(|e| invalid(format!("bad attribute value: {e}")))?;
            attrs.insert(a.key.into_inner().to_string(), value.into_owned());
        }
        let parent = stack.last().map(String::as_str);
        match (parent, name.as_str()) {
            (None, "log") => {
                if saw_root {
                    return Err(invalid("more than one root element".into()));
                }
                saw_root = true;
                match attrs.get("xes.version").map(String::as_str) {
                    Some("1.0") | Some("2.0") => {}
                    other => return Err(invalid(format!("unsupported xes.version {other:?}"))),
                }
            }
            (None, other) => return Err(invalid(format!("root element must be `log`, found `{other}`"))),
            (Some("log"), "extension") => {
                for key in ["name", "prefix", "uri"] {
                    if !attrs.contains_key(key) {
                        return Err(invalid(format!("extension without `{key}`")));
                    }
                }
                if seen_trace {
                    return Err(invalid("extension after the first trace".into()));
                }
                prefixes.insert(attrs["prefix"].clone());
            }
            (Some("log"), "global") => {
                match attrs.get("scope").map(String::as_str) {
                    None | Some("trace") | Some("event") => {}
                    Some(s) => return Err(invalid(format!("global scope `{s}`"))),
                }
                if seen_trace {
                    return Err(invalid("global after the first trace".into()));
                }
            }
            (Some("log"), "classifier") => {
                if !attrs.contains_key("name") || !attrs.contains_key("keys") {
                    return Err(invalid("classifier needs `name` and `keys`".into()));
                }
            }
            (Some("log"), "trace") => {
                seen_trace = true;
                summary.traces += 1;
            }
            (Some("trace"), "event") => summary.events += 1,
            (Some(p), tag) if ATTRIBUTE_TAGS.contains(&tag) && p != "classifier" => {
                let key = attrs.get("key").ok_or_else(|| invalid(format!("`{tag}` without key")))?;
                if let Some((prefix, _)) = key.split_once(':') {
                    let standard = ["concept", "time", "org", "lifecycle"];
                    if standard.contains(&prefix) && !prefixes.contains(prefix) {
                        return Err(invalid(format!("key `{key}` uses undeclared extension `{prefix}`")));
                    }
                }
                if !matches!(tag, "list" | "container") {
                    let value = attrs.get("value").ok_or_else(|| invalid(format!("`{key}` without value")))?;
                    check_value(tag, value).map_err(|m| invalid(format!("`{key}`: {m}")))?;
                    if p == "event" && key == "lifecycle:transition" {
                        summary.lifecycles.insert(value.clone());
                    }
                }
            }
            (Some(p), tag) => return Err(invalid(format!("`{tag}` not allowed inside `{p}`"))),
        }
        if !empty {
            stack.push(name);
        }
    }
    if !saw_root {
        return Err(invalid("no `log` element".into()));
    }
    if !stack.is_empty() {
        return Err(invalid("unclosed elements".into()));
    }
    Ok(summary)
}

fn check_value(tag: &str, value: &str) -> Result<(), String> {
    match tag {
        "date" => DateTime::parse_from_rfc3339(value).map(|_| ()).map_err(|_| format!("`{value}` is not xs:dateTime")),
        "int" => value.parse::<i64>().map(|_| ()).map_err(|_| format!("`{value}` is not an integer")),
        "float" => value.parse::<f64>().map(|_| ()).map_err(|_| format!("`{value}` is not a number")),
        "boolean" => match value {
            "true" | "false" => Ok(()),
            _ => Err(format!("`{value}` is not a boolean")),
        },
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DirectlyFollowsGraph {
    /// Activity label to number of events.
    pub nodes: BTreeMap<String, usize>,
    /// (from, to) to number of adjacent occurrences within a case.
    pub edges: BTreeMap<(String, String), usize>,
    pub start: BTreeMap<String, usize>,
    pub end: BTreeMap<String, usize>,
}

pub fn mine_dfg(log: &EventLog) -> Result<DirectlyFollowsGraph, ExportError> {
    if log.records.is_empty() {
        return Err(ExportError::EmptyLog);
    }
    let mut g = DirectlyFollowsGraph::default();
    for events in log.cases().values() {
        for e in events {
            *g.nodes.entry(e.activity.clone()).or_default() += 1;
        }
        for pair in events.windows(2) {
            *g.edges.entry((pair[0].activity.clone(), pair[1].activity.clone())).or_default() += 1;
        }
        *g.start.entry(events[0].activity.clone()).or_default() += 1;
        *g.end.entry(events[events.len() - 1].activity.clone()).or_default() += 1;
    }
    Ok(g)
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Graphviz digraph; edge labels are counts, start/end shown as extra nodes.
pub fn to_dot(g: &DirectlyFollowsGraph) -> String {
    let mut out = String::from("digraph dfg {\n  rankdir=LR;\n  node [shape=box];\n");
    out.push_str("  \"__start\" [shape=circle, label=\"\"];\n  \"__end\" [shape=doublecircle, label=\"\"];\n");
    for (node, count) in &g.nodes {
        let _ = writeln!(out, "  {} [label={}];", dot_quote(node), dot_quote(&format!("{node} ({count})")));
    }
    for (node, count) in &g.start {
        let _ = writeln!(out, "  \"__start\" -> {} [label=\"{count}\"];", dot_quote(node));
    }
    for ((from, to), count) in &g.edges {
        let _ = writeln!(out, "  {} -> {} [label=\"{count}\"];", dot_quote(from), dot_quote(to));
    }
    for (node, count) in &g.end {
        let _ = writeln!(out, "  {} -> \"__end\" [label=\"{count}\"];", dot_quote(node));
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Xes,
    Dot,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "xes" => Ok(ExportFormat::Xes),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(format!("unknown export format `{other}` (expected csv, xes or dot)")),
        }
    }
}

impl ExportFormat {
    pub fn content_type(&self) -> &'static str {
        match self {
            ExportFormat::Csv => "text/csv; charset=utf-8",
            ExportFormat::Xes => "application/xml",
            ExportFormat::Dot => "text/vnd.graphviz",
        }
    }
}

/// The topic to export when none is named: the only topic whose activities
/// are all labeled.
pub fn default_topic(run: &Run) -> Result<usize, ExportError> {
    let done = run.fully_labeled_topics()?;
    match done.as_slice() {
        [only] => Ok(*only),
        [] => Err(ExportError::Unlabeled(run.unlabeled(None)?)),
        _ => Err(ExportError::AmbiguousTopic(done)),
    }
}

/// Event log of `topic` (or the default topic) in the requested format.
pub fn render(run: &Run, topic: Option<usize>, format: ExportFormat) -> Result<String, ExportError> {
    let topic = match topic {
        Some(t) => t,
        None => default_topic(run)?,
    };
    let log = build_event_log(run, topic)?;
    Ok(match format {
        ExportFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(&log, &mut buf)?;
            String::from_utf8(buf).expect("csv writer emits UTF-8")
        }
        ExportFormat::Xes => write_xes(&log),
        ExportFormat::Dot => to_dot(&mine_dfg(&log)?),
    })
}
