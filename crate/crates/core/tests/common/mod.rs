#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mailmine::config::PipelineConfig;
use mailmine::ingest::{parse_csv, Corpus, CsvSchema};
use mailmine::pipeline::CutSetting;
use mailmine::run::Run;

pub const LABELS: [(usize, &str); 4] = [
    (1, "submit demand"),
    (2, "request information"),
    (3, "respond information"),
    (4, "accept demand or refuse demand"),
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn table1() -> Corpus {
    parse_csv(fixture("table1.csv"), &CsvSchema::default()).unwrap()
}

/// Topics cut at k=2, default instances, k=4 activities on the mission topic.
pub fn mission_run() -> Run {
    let mut run = Run::new(table1(), PipelineConfig::default()).unwrap();
    run.run_topics(Some(CutSetting::K(2))).unwrap();
    run.run_instances(None, None).unwrap();
    run.run_activities(Some(4), Some(1), None).unwrap();
    run
}

pub fn labeled_run() -> Run {
    let mut run = mission_run();
    run.load_labels(std::fs::File::open(fixture("labels.csv")).unwrap()).unwrap();
    run
}

pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliOutput {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }

    pub fn error(&self) -> serde_json::Value {
        let v: serde_json::Value = serde_json::from_str(self.stderr.lines().last().unwrap_or_default())
            .unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", self.stderr));
        v["error"].clone()
    }
}

/// Runs the CLI against `run_file` with the given arguments and stdin.
pub fn cli(run_file: &Path, args: &[&str], stdin: &str) -> CliOutput {
    let mut argv = vec!["mailmine".to_string(), "--run".into(), run_file.display().to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let mut input = stdin.as_bytes();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = mailmine::cli::run(argv, &mut input, &mut out, &mut err);
    CliOutput { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}
