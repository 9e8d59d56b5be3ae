//! Runs the pipeline, labels the mission activities from the labels file and
//! classifies a new email against the labeled centroids.
//!
//! cargo run --example label_classify

use chrono::{TimeZone, Utc};
use mailmine::config::PipelineConfig;
use mailmine::ingest::{parse_csv, CsvSchema, Email};
use mailmine::labeling::ClassificationResult;
use mailmine::pipeline::CutSetting;
use mailmine::run::Run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let corpus = parse_csv(format!("{dir}/fixtures/table1.csv"), &CsvSchema::default())?;
    let mut run = Run::new(corpus, PipelineConfig::default())?;
    run.run_topics(Some(CutSetting::K(2)))?;
    run.run_instances(None, None)?;
    run.run_activities(Some(4), Some(1), None)?;

    let by_id = run.emails_by_id();
    for a in run.activity_phase()?.of_topic(1).into_iter().flat_map(|t| &t.clusters) {
        println!("activity {} {:?}, medoid: {}", a.activity_id, a.email_ids, by_id[&a.medoid_id].subject);
    }
    let changed = run.load_labels(std::fs::File::open(format!("{dir}/fixtures/labels.csv"))?)?;
    println!("{changed} labels assigned, unlabeled in topic 1: {:?}", run.unlabeled(Some(1))?);

    let new_email = Email {
        id: 100,
        sender: "diana.jlailaty@gmail.com".into(),
        receivers: vec!["missionjc@dauphine.fr".into()],
        subject: "mission demand".into(),
        body: "Please find enclosed my mission application for the workshop in Lyon.".into(),
        timestamp: Utc.with_ymd_and_hms(2016, 9, 1, 9, 0, 0).unwrap().fixed_offset(),
    };
    for result in run.classify(&[new_email])? {
        match result {
            ClassificationResult::Classified { predicted_label, confidence, distance_to_centroid, .. } => {
                println!("-> {predicted_label} (confidence {confidence:.2}, distance {distance_to_centroid:.3})")
            }
            ClassificationResult::Unclassifiable { reason, .. } => println!("-> unclassifiable: {reason}"),
        }
    }
    Ok(())
}
