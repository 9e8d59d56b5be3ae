mod common;

use std::collections::BTreeSet;

use mailmine::config::PipelineConfig;
use mailmine::labeling::{ClassificationResult, LabelSource};
use mailmine::pipeline::CutSetting;
use mailmine::run::Run;

/// Labels the activity that contains `member`.
fn label_containing(run: &mut Run, member: u64, label: &str) {
    let id = run.activity_phase().unwrap().all().find(|a| a.email_ids.contains(&member)).unwrap().activity_id;
    run.assign_label(id, label, LabelSource::User).unwrap();
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Email 22 is classified against centroids trained without it. The expected
/// label comes from an independent nearest-mean computation over the member
/// embeddings of each labeled cluster.
#[test]
fn held_out_email_goes_to_the_nearest_labeled_mean() {
    let full = common::table1();
    let held_out = full.get(22).unwrap().clone();
    let keep: BTreeSet<u64> = full.ids().into_iter().filter(|&id| id != 22).collect();
    let mut run = Run::new(full.subset(&keep).unwrap(), PipelineConfig::default()).unwrap();
    run.run_topics(Some(CutSetting::K(2))).unwrap();
    run.run_instances(None, None).unwrap();
    let mission = run.topic_phase().unwrap().clusters.iter().find(|c| c.email_ids.contains(&1)).unwrap().cluster_id;
    let seed = run.instance_phase().unwrap().all().find(|i| i.email_ids.contains(&20)).unwrap().instance_id;
    run.run_activities(Some(4), Some(mission), Some(seed)).unwrap();

    label_containing(&mut run, 1, "submit demand");
    label_containing(&mut run, 2, "request information");
    label_containing(&mut run, 3, "respond information");
    label_containing(&mut run, 4, "accept demand or refuse demand");

    let ws = run.workspace().unwrap();
    let space = run.activity_space(&ws).unwrap();
    let (subject, body) = ws.model.vectorize(&held_out);
    let x = space.embed(&subject, &body, &held_out.participants());
    let mut best: Option<(f64, String)> = None;
    for a in run.activity_phase().unwrap().of_topic(mission).unwrap().clusters.iter() {
        let members: Vec<Vec<f64>> = a.email_ids.iter().map(|&id| space.embed_email(&ws, id).unwrap()).collect();
        let mean: Vec<f64> =
            (0..x.len()).map(|j| members.iter().map(|m| m[j]).sum::<f64>() / members.len() as f64).collect();
        let d = euclidean(&x, &mean);
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, run.labels.label(a.activity_id).unwrap().to_string()));
        }
    }
    let (expected_distance, expected) = best.unwrap();

    match run.classify(&[held_out]).unwrap().remove(0) {
        ClassificationResult::Classified { predicted_label, confidence, distance_to_centroid, .. } => {
            assert_eq!(predicted_label, expected);
            assert!((distance_to_centroid - expected_distance).abs() < 1e-9);
            assert!(confidence > 0.5 && confidence <= 1.0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn training_emails_classify_into_their_own_cluster() {
    let run = common::labeled_run();
    let emails: Vec<_> = [1u64, 2, 3, 20, 21, 22].iter().map(|id| run.corpus.get(*id).unwrap().clone()).collect();
    let labels: Vec<String> =
        run.classify(&emails).unwrap().iter().map(|r| r.label().unwrap_or("-").to_string()).collect();
    assert_eq!(
        labels,
        [
            "submit demand",
            "request information",
            "respond information",
            "submit demand",
            "request information",
            "respond information"
        ]
    );
}
