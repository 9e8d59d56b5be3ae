//! Splits the meeting and mission topics into process instances with the
//! three instance distance variants and scores each against the known cases.
//!
//! cargo run --example instance_variants

use mailmine::cluster::{quality, DistanceSpec, FlatClustering, InstanceVariant, Linkage};
use mailmine::ingest::{parse_csv, CsvSchema, EmailId};
use mailmine::pipeline::{discover_instances, CutSetting, TopicCluster, Workspace};
use mailmine::textprep::{BoostConfig, CleansingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let ws = Workspace::new(corpus, &CleansingConfig::default(), &BoostConfig::default())?;
    let topics: [(&str, Vec<Vec<EmailId>>); 2] = [
        ("meeting", vec![vec![5, 6], vec![7, 8, 9], vec![10, 11, 12], vec![13, 14, 15]]),
        ("mission", vec![vec![1, 2, 3, 4, 16], vec![20, 21, 22, 23]]),
    ];
    for (id, (name, cases)) in topics.into_iter().enumerate() {
        let mut email_ids: Vec<EmailId> = cases.iter().flatten().copied().collect();
        email_ids.sort_unstable();
        let tc = TopicCluster { cluster_id: id + 1, email_ids };
        let gold = FlatClustering::from_groups(cases.clone());
        println!("{name} topic, gold {cases:?}");
        for variant in [InstanceVariant::Body, InstanceVariant::BodySubject, InstanceVariant::BodySubjectTime] {
            let spec = DistanceSpec::instance_variant(variant);
            let found = discover_instances(&ws, &tc, &spec, Linkage::Complete, CutSetting::K(cases.len()), 1)?;
            let pred = FlatClustering::from_groups(found.instances.iter().map(|i| i.email_ids.clone()).collect());
            let q = quality(&pred, &gold)?;
            let groups: Vec<&Vec<EmailId>> = found.instances.iter().map(|i| &i.email_ids).collect();
            println!("  {variant:?}: rand={:.3} {groups:?}", q.rand_index.unwrap_or_default());
        }
    }
    Ok(())
}
