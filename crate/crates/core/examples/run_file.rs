//! Drives every phase through a run file with a TOML configuration, saves
//! it, reloads it and re-cuts the instance phase.
//!
//! cargo run --example run_file

use mailmine::config::PipelineConfig;
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::run::{Phase, Run};

const CONFIG: &str = r#"
[topics]
cut = { k = 2 }

[instances]
linkage = "complete"

[activities]
k_sweep_radius = 1
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = PipelineConfig::from_toml(CONFIG)?;
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let mut run = Run::new(corpus, config)?;
    run.run_topics(None)?;
    run.run_instances(None, None)?;
    run.run_activities(None, None, None)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("run.json");
    run.save(&path)?;
    let reloaded = Run::load(&path)?;
    println!("saved {} bytes, reload equal: {}", std::fs::metadata(&path)?.len(), reloaded.to_json() == run.to_json());

    for t in &run.instance_phase()?.topics {
        println!("topic {}: {} instances (cut {:?})", t.topic_cluster_id, t.instances.len(), t.cut.setting);
    }
    run.recut(Phase::Instances, 3, Some(2), true)?;
    for t in &run.instance_phase()?.topics {
        let groups: Vec<&Vec<u64>> = t.instances.iter().map(|i| &i.email_ids).collect();
        println!("after recut, topic {}: {groups:?}", t.topic_cluster_id);
    }
    for t in &run.activity_phase()?.topics {
        println!("topic {} activities: k={} from sweep {:?}", t.topic_cluster_id, t.k, t.sweep.iter().map(|s| s.k).collect::<Vec<_>>());
    }
    Ok(())
}
