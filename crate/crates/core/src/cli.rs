//! Command-line driver. Every subcommand reads and writes the run file.
//!
//! Exit codes: 0 success, 1 other failures, 2 invalid configuration,
//! 3 a required earlier phase (or the run file itself) is missing.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cluster::{self, FlatClustering};
use crate::config::{ConfigError, PipelineConfig};
use crate::export::{self, ExportError, ExportFormat};
use crate::ingest::{self, CsvSchema, EmailId, IngestError};
use crate::labeling::{LabelError, LabelSource};
use crate::pipeline::CutSetting;
use crate::run::{Phase, Run, RunError};
use crate::service;

#[derive(Debug, Parser)]
#[command(name = "mailmine", version, about = "Discover process event logs in email archives")]
pub struct Cli {
    /// Run file holding every phase's output.
    #[arg(long, global = true, default_value = "run.json")]
    pub run: PathBuf,
    /// TOML pipeline configuration applied before the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Csv,
    Mbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportPhase {
    Topics,
    Instances,
    Activities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Xes,
    Dot,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Xes => ExportFormat::Xes,
            FormatArg::Dot => ExportFormat::Dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecutPhase {
    Topics,
    Instances,
    Activities,
}

impl From<RecutPhase> for Phase {
    fn from(p: RecutPhase) -> Self {
        match p {
            RecutPhase::Topics => Phase::Topics,
            RecutPhase::Instances => Phase::Instances,
            RecutPhase::Activities => Phase::Activities,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load an email corpus into a fresh run file.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Guessed from the file extension when omitted.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
    },
    /// Cluster the corpus into topics.
    Topics {
        #[arg(long, conflicts_with = "height")]
        k: Option<usize>,
        #[arg(long)]
        height: Option<f64>,
    },
    /// Split topics into process instances.
    Instances {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        topic: Option<usize>,
    },
    /// Cluster emails into activities with seeded k-means.
    Activities {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        topic: Option<usize>,
        #[arg(long, requires = "topic")]
        seed_instance: Option<usize>,
    },
    /// Re-cut one phase with a new k and rerun the later phases.
    Recut {
        #[arg(long, value_enum)]
        phase: RecutPhase,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        topic: Option<usize>,
        /// Leave later phases invalidated instead of recomputing them.
        #[arg(long)]
        no_rerun: bool,
    },
    /// Name activity clusters, from a CSV file or interactively.
    Label {
        /// CSV with header `activity_id,label`.
        #[arg(long)]
        labels_file: Option<PathBuf>,
    },
    /// Assign new emails to labeled activities.
    Classify {
        /// Emails in the ingest CSV layout.
        #[arg(long)]
        email: PathBuf,
    },
    /// Write the event log of a fully labeled topic.
    Export {
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[arg(long)]
        topic: Option<usize>,
        /// Standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a phase against a gold standard CSV (`email_id,cluster`) over
    /// the emails both cover.
    Report {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value = "topics")]
        phase: ReportPhase,
        /// Only compare the instances or activities of this topic.
        #[arg(long)]
        topic: Option<usize>,
    },
    /// Serve the HTTP API for the run file.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub key: Option<String>,
}

impl CliError {
    fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Self { code, kind, message: message.into(), key: None }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "code": self.code, "kind": self.kind, "message": self.message, "key": self.key } })
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let key = e.key().map(str::to_string);
        let kind = if matches!(e, ConfigError::Io { .. }) { "config_io" } else { "invalid_config" };
        Self { code: 2, kind, message: e.to_string(), key }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::MissingPhase(_) => CliError::new(3, "missing_phase", e.to_string()),
            RunError::Unlabeled(_) => CliError::new(3, "unlabeled", e.to_string()),
            RunError::Label(LabelError::EmptyLabel) => CliError::new(1, "invalid_label", e.to_string()),
            RunError::UnknownTopic(_) | RunError::UnknownActivity(_) => CliError::new(1, "not_found", e.to_string()),
            _ => CliError::new(1, "run", e.to_string()),
        }
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::Run(r) => r.into(),
            ExportError::Unlabeled(_) => CliError::new(3, "unlabeled", e.to_string()),
            _ => CliError::new(1, "export", e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::new(1, "ingest", e.to_string())
    }
}

impl From<cluster::ClusterError> for CliError {
    fn from(e: cluster::ClusterError) -> Self {
        CliError::new(1, "report", e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(1, "io", format!("{}: {e}", path.display()))
}

/// Parses `args` (program name first) and executes the command.
pub fn run<I, T>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let err = CliError::new(1, "usage", text.trim_end());
                let _ = writeln!(stderr, "{}", err.to_json());
            }
            return code;
        }
    };
    match execute(&cli, stdin, stdout, stderr) {
        Ok(()) => 0,
        Err(err) => {
            let _ = writeln!(stderr, "{}", err.to_json());
            err.code
        }
    }
}

fn load_run(cli: &Cli) -> Result<Run, CliError> {
    if !cli.run.exists() {
        return Err(CliError::new(
            3,
            "missing_phase",
            format!("run file {} does not exist; run `ingest` first", cli.run.display()),
        ));
    }
    let mut run = Run::load(&cli.run)?;
    if let Some(path) = &cli.config {
        run.set_config(PipelineConfig::load(path)?)?;
    }
    Ok(run)
}

fn print_json(stdout: &mut dyn Write, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json values serialize");
    writeln!(stdout, "{text}").map_err(|e| CliError::new(1, "io", e.to_string()))
}

fn execute(cli: &Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Ingest { input, format } => {
            let config = match &cli.config {
                Some(path) => PipelineConfig::load(path)?,
                None => PipelineConfig::default(),
            };
            let format = format.unwrap_or_else(|| match input.extension().and_then(|e| e.to_str()) {
                Some("mbox") => InputFormat::Mbox,
                _ => InputFormat::Csv,
            });
            let corpus = match format {
                InputFormat::Csv => ingest::parse_csv(input, &CsvSchema::default())?,
                InputFormat::Mbox => ingest::parse_mbox(input)?,
            };
            for w in &corpus.warnings {
                let _ = writeln!(stderr, "{}", json!({ "warning": w.to_string() }));
            }
            let run = Run::new(corpus, config)?;
            run.save(&cli.run)?;
            print_json(stdout, &json!({ "emails": run.corpus.len(), "corpus_digest": run.corpus_digest }))
        }
        Command::Topics { k, height } => {
            let mut run = load_run(cli)?;
            let cut = match (k, height) {
                (Some(k), _) => Some(CutSetting::K(*k)),
                (None, Some(h)) => Some(CutSetting::Height(*h)),
                _ => None,
            };
            run.run_topics(cut)?;
            run.save(&cli.run)?;
            let phase = run.topic_phase()?;
            print_json(stdout, &json!({ "phase": "topics", "cut": phase.cut, "clusters": phase.clusters }))
        }
        Command::Instances { k, topic } => {
            let mut run = load_run(cli)?;
            run.run_instances(k.map(CutSetting::K), *topic)?;
            run.save(&cli.run)?;
            let phase = run.instance_phase()?;
            let topics: Vec<Value> = phase
                .topics
                .iter()
                .map(|t| json!({ "topic_cluster_id": t.topic_cluster_id, "cut": t.cut, "instances": t.instances }))
                .collect();
            print_json(stdout, &json!({ "phase": "instances", "topics": topics }))
        }
        Command::Activities { k, topic, seed_instance } => {
            let mut run = load_run(cli)?;
            run.run_activities(*k, *topic, *seed_instance)?;
            run.save(&cli.run)?;
            print_json(stdout, &activities_summary(&run)?)
        }
        Command::Recut { phase, k, topic, no_rerun } => {
            let mut run = load_run(cli)?;
            run.recut((*phase).into(), *k, *topic, !no_rerun)?;
            run.save(&cli.run)?;
            print_json(stdout, &serde_json::to_value(service::summarize(&run)).expect("summary serializes"))
        }
        Command::Label { labels_file } => {
            let mut run = load_run(cli)?;
            run.activity_phase()?;
            let changed = match labels_file {
                Some(path) => {
                    let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
                    run.load_labels(file)?
                }
                None => label_interactively(&mut run, stdin, stderr)?,
            };
            run.save(&cli.run)?;
            print_json(
                stdout,
                &json!({ "changed": changed, "unlabeled": run.unlabeled(None)?, "labels": run.labels.entries.iter()
                    .map(|(id, e)| (id.to_string(), e.label.clone())).collect::<BTreeMap<_, _>>() }),
            )
        }
        Command::Classify { email } => {
            let run = load_run(cli)?;
            run.activity_phase()?;
            if run.labels.is_empty() {
                return Err(RunError::MissingPhase(Phase::Labels).into());
            }
            let emails = ingest::parse_csv(email, &CsvSchema::default())?;
            let results = run.classify(&emails.emails)?;
            print_json(stdout, &serde_json::to_value(results).expect("results serialize"))
        }
        Command::Export { format, topic, out } => {
            let run = load_run(cli)?;
            let text = export::render(&run, *topic, (*format).into())?;
            match out {
                Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
                None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::new(1, "io", e.to_string())),
            }
        }
        Command::Report { gold, phase, topic } => {
            let run = load_run(cli)?;
            let report = report(&run, gold, *phase, *topic)?;
            print_json(stdout, &serde_json::to_value(report).expect("report serializes"))
        }
        Command::Serve { addr } => {
            let run = load_run(cli)?;
            if cli.config.is_some() {
                run.save(&cli.run)?;
            }
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| CliError::new(1, "io", e.to_string()))?;
            runtime.block_on(service::serve(cli.run.clone(), *addr))?;
            Ok(())
        }
    }
}

fn activities_summary(run: &Run) -> Result<Value, CliError> {
    let phase = run.activity_phase()?;
    let topics: Vec<Value> = phase
        .topics
        .iter()
        .map(|t| {
            let clusters: Vec<Value> = t
                .clusters
                .iter()
                .map(|a| json!({ "activity_id": a.activity_id, "email_ids": a.email_ids, "medoid_id": a.medoid_id }))
                .collect();
            json!({
                "topic_cluster_id": t.topic_cluster_id,
                "k": t.k,
                "seed_instance_id": t.seed_instance_id,
                "stats": t.stats,
                "sweep": t.sweep,
                "activities": clusters,
            })
        })
        .collect();
    Ok(json!({ "phase": "activities", "topics": topics }))
}

/// Shows each unlabeled medoid and reads one label per line; an empty line
/// skips the cluster and end of input stops.
fn label_interactively(run: &mut Run, stdin: &mut dyn BufRead, prompt: &mut dyn Write) -> Result<usize, CliError> {
    let emails: BTreeMap<EmailId, ingest::Email> = run.corpus.emails.iter().map(|e| (e.id, e.clone())).collect();
    let mut changed = 0;
    for id in run.unlabeled(None)? {
        let activity = run.activity(id)?.clone();
        let medoid = &emails[&activity.medoid_id];
        let _ = writeln!(
            prompt,
            "activity {id} (topic {}, {} emails)\n  from: {}\n  subject: {}\n  {}\nlabel> ",
            activity.topic_cluster_id,
            activity.email_ids.len(),
            medoid.sender,
            medoid.subject,
            medoid.body.chars().take(300).collect::<String>().replace('\n', "\n  "),
        );
        let mut line = String::new();
        if stdin.read_line(&mut line).map_err(|e| CliError::new(1, "io", e.to_string()))? == 0 {
            break;
        }
        let label = line.trim();
        if label.is_empty() {
            continue;
        }
        changed += usize::from(run.assign_label(id, label, LabelSource::User)?);
    }
    Ok(changed)
}

/// Reads `email_id,cluster` rows; cluster names are arbitrary strings.
pub fn read_gold(path: &Path) -> Result<FlatClustering, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::new(1, "gold", e.to_string()))?;
    let mut names: BTreeMap<String, usize> = BTreeMap::new();
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| CliError::new(1, "gold", e.to_string()))?;
        let bad = || CliError::new(1, "gold", format!("row {}: expected `email_id,cluster`", i + 1));
        let id: EmailId = row.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(bad)?;
        let name = row.get(1).map(str::trim).filter(|s| !s.is_empty()).ok_or_else(bad)?;
        let next = names.len();
        ids.push(id);
        labels.push(*names.entry(name.to_string()).or_insert(next));
    }
    Ok(FlatClustering::from_labels(&ids, &labels))
}

fn report(run: &Run, gold: &Path, phase: ReportPhase, topic: Option<usize>) -> Result<cluster::QualityReport, CliError> {
    let gold = read_gold(gold)?;
    let in_topic = |t: usize| topic.is_none_or(|x| x == t);
    let groups: Vec<Vec<EmailId>> = match phase {
        ReportPhase::Topics => run.topic_phase()?.clusters.iter().map(|c| c.email_ids.clone()).collect(),
        ReportPhase::Instances => run
            .instance_phase()?
            .all()
            .filter(|i| in_topic(i.topic_cluster_id))
            .map(|i| i.email_ids.clone())
            .collect(),
        ReportPhase::Activities => run
            .activity_phase()?
            .all()
            .filter(|a| in_topic(a.topic_cluster_id))
            .map(|a| a.email_ids.clone())
            .collect(),
    };
    let pred = FlatClustering::from_groups(groups);
    let shared: Vec<EmailId> =
        gold.assignments.keys().copied().filter(|id| pred.assignments.contains_key(id)).collect();
    if shared.is_empty() {
        return Err(CliError::new(1, "report", "the gold standard shares no email ids with the phase output"));
    }
    let mut report = cluster::quality(&pred.restrict(&shared), &gold.restrict(&shared))?;
    if phase == ReportPhase::Topics && topic.is_none() {
        report.silhouette = Some(run.topic_phase()?.cut.silhouette);
    }
    Ok(report)
}
