//! Seeded k-means over the mission topic: the k estimate, the silhouette
//! sweep and the clusters for a fixed k of 4.
//!
//! cargo run --example activities

use mailmine::cluster::DistanceSpec;
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::pipeline::{
    cluster_activities, default_sweep, estimate_k, select_seed_instance, ActivitySpace, ProcessInstance,
    SynonymTable, TopicCluster, Workspace,
};
use mailmine::textprep::{BoostConfig, CleansingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let ws = Workspace::new(corpus, &CleansingConfig::default(), &BoostConfig::default())?;
    let topic = TopicCluster { cluster_id: 1, email_ids: vec![1, 2, 3, 4, 16, 20, 21, 22, 23] };
    let instances = vec![
        ProcessInstance { instance_id: 1, topic_cluster_id: 1, email_ids: vec![1, 2, 3, 4, 16] },
        ProcessInstance { instance_id: 2, topic_cluster_id: 1, email_ids: vec![20, 21, 22, 23] },
    ];
    let stats = estimate_k(&instances)?;
    let seed = select_seed_instance(&ws, &instances, &stats, None)?;
    println!("average instance size {:.1}, k estimate {}, seed instance {:?}", stats.average_size, stats.k, seed.email_ids);

    let space = ActivitySpace::new(&ws, &DistanceSpec::activity_default(), &SynonymTable::english())?;
    let sweep = default_sweep(stats.k, 2, topic.email_ids.len());
    for user_k in [None, Some(4)] {
        let found = cluster_activities(&ws, &space, &topic, &instances, seed, &sweep, user_k, 1)?;
        println!("user k {user_k:?} -> k={}", found.k);
        for s in &found.sweep {
            println!("  sweep k={} silhouette={:.3} iterations={}", s.k, s.silhouette, s.iterations);
        }
        for a in &found.clusters {
            println!("  activity {}: {:?} medoid {}", a.activity_id, a.email_ids, a.medoid_id);
        }
    }
    Ok(())
}
