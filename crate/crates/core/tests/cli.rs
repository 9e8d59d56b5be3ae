mod common;

use common::{cli, fixture};
use mailmine::export::validate_xes;
use mailmine::run::Run;

fn pipeline(run: &std::path::Path) {
    let table = fixture("table1.csv");
    assert_eq!(cli(run, &["ingest", "--input", table.to_str().unwrap()], "").code, 0);
    assert_eq!(cli(run, &["topics", "--k", "2"], "").code, 0);
    assert_eq!(cli(run, &["instances"], "").code, 0);
    assert_eq!(cli(run, &["activities", "--k", "4", "--topic", "1"], "").code, 0);
}

#[test]
fn topics_with_k_three_writes_three_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    let table = fixture("table1.csv");
    assert_eq!(cli(&run, &["ingest", "--input", table.to_str().unwrap()], "").code, 0);
    let out = cli(&run, &["topics", "--k", "3"], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.json()["clusters"].as_array().unwrap().len(), 3);
    let saved = Run::load(&run).unwrap();
    assert_eq!(saved.topic_phase().unwrap().clusters.len(), 3);
    let mut all: Vec<u64> = saved.topic_phase().unwrap().clusters.iter().flat_map(|c| c.email_ids.clone()).collect();
    all.sort_unstable();
    assert_eq!(all, saved.corpus.ids());
}

#[test]
fn labels_file_then_xes_export_is_valid() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let labels = fixture("labels.csv");
    let out = cli(&run, &["label", "--labels-file", labels.to_str().unwrap()], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.json()["changed"], 4);
    let out = cli(&run, &["export", "--format", "xes"], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    let summary = validate_xes(&out.stdout).unwrap();
    assert_eq!((summary.traces, summary.events), (2, 9));
}

#[test]
fn csv_export_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let labels = fixture("labels.csv");
    assert_eq!(cli(&run, &["label", "--labels-file", labels.to_str().unwrap()], "").code, 0);
    let out_path = dir.path().join("log.csv");
    let out = cli(&run, &["export", "--format", "csv", "--out", out_path.to_str().unwrap()], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(std::fs::read(&out_path).unwrap(), std::fs::read(fixture("event_log.csv")).unwrap());
}

#[test]
fn classify_before_labeling_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let email = fixture("table1.csv");
    let out = cli(&run, &["classify", "--email", email.to_str().unwrap()], "");
    assert_eq!(out.code, 3);
    assert_eq!(out.error()["kind"], "missing_phase");
}

#[test]
fn missing_earlier_phases_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    assert_eq!(cli(&run, &["topics"], "").code, 3);
    let table = fixture("table1.csv");
    assert_eq!(cli(&run, &["ingest", "--input", table.to_str().unwrap()], "").code, 0);
    assert_eq!(cli(&run, &["instances"], "").code, 3);
    assert_eq!(cli(&run, &["activities"], "").code, 3);
    assert_eq!(cli(&run, &["label"], "").code, 3);
    assert_eq!(cli(&run, &["export"], "").code, 3);
}

#[test]
fn export_with_unlabeled_activities_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let out = cli(&run, &["export", "--format", "csv"], "");
    assert_eq!(out.code, 3);
    assert_eq!(out.error()["kind"], "unlabeled");
}

#[test]
fn invalid_config_exits_two_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[activities.distance]\nw_subject = 0.3\nw_body = 0.7\nw_time = 0.2\n").unwrap();
    let table = fixture("table1.csv");
    let out = cli(&run, &["--config", config.to_str().unwrap(), "ingest", "--input", table.to_str().unwrap()], "");
    assert_eq!(out.code, 2);
    assert_eq!(out.error()["key"], "activities.distance.w_time");

    std::fs::write(&config, "[topics]\nlinkag = \"single\"\n").unwrap();
    assert_eq!(cli(&run, &["ingest", "--input", table.to_str().unwrap()], "").code, 0);
    let out = cli(&run, &["--config", config.to_str().unwrap(), "topics"], "");
    assert_eq!(out.code, 2);
    assert_eq!(out.error()["key"], "linkag");
}

#[test]
fn config_change_invalidates_later_phases() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let config = dir.path().join("avg.toml");
    std::fs::write(&config, "[topics]\nlinkage = \"average\"\n").unwrap();
    let out = cli(&run, &["--config", config.to_str().unwrap(), "instances"], "");
    assert_eq!(out.code, 3);
    assert_eq!(cli(&run, &["--config", config.to_str().unwrap(), "topics", "--k", "2"], "").code, 0);
    let saved = Run::load(&run).unwrap();
    assert_eq!(saved.config.topics.linkage, mailmine::cluster::Linkage::Average);
    assert!(saved.instances.is_none());
}

#[test]
fn usage_errors_and_help() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    let out = cli(&run, &["--help"], "");
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("topics"));
    let out = cli(&run, &["frobnicate"], "");
    assert_eq!(out.code, 1);
    assert_eq!(out.error()["kind"], "usage");
}

#[test]
fn interactive_labeling_reads_one_label_per_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let out = cli(&run, &["label"], "submit demand\n\nrespond information\n");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stderr.contains("label> "));
    let saved = Run::load(&run).unwrap();
    assert_eq!(saved.labels.label(1), Some("submit demand"));
    assert_eq!(saved.labels.label(2), None);
    assert_eq!(saved.labels.label(3), Some("respond information"));
}

#[test]
fn report_scores_phases_against_gold_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    pipeline(&run);
    let gold = fixture("gold_activities.csv");
    let out = cli(&run, &["report", "--gold", gold.to_str().unwrap(), "--phase", "activities", "--topic", "1"], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.json()["purity"], 1.0);
    assert_eq!(out.json()["rand_index"], 1.0);
    let gold = fixture("gold_topics.csv");
    let out = cli(&run, &["report", "--gold", gold.to_str().unwrap()], "");
    let report = out.json();
    assert!(report["rand_index"].as_f64().unwrap() >= 0.89);
    assert!(report["silhouette"].is_number());
}

#[test]
fn mbox_ingest() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.json");
    let mbox = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/three.mbox");
    let out = cli(&run, &["ingest", "--input", mbox.to_str().unwrap()], "");
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.json()["emails"], 3);
}
