//! Clusters the fixture into process topics, prints the dendrogram merges and
//! compares cuts against the known meeting/mission split.
//!
//! cargo run --example topics

use mailmine::cluster::{quality, DistanceSpec, FlatClustering, Linkage};
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::pipeline::{cluster_topics, CutSetting, Workspace};
use mailmine::textprep::{BoostConfig, CleansingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let ws = Workspace::new(corpus, &CleansingConfig::default(), &BoostConfig::default())?;
    let spec = DistanceSpec::topic_default();
    let gold = FlatClustering::from_groups(vec![vec![1, 2, 3, 4, 16, 20, 21, 22, 23], (5..=15).collect()]);

    let auto = cluster_topics(&ws, &spec, Linkage::Complete, CutSetting::Auto)?;
    println!("merges (height, left, right):");
    for m in &auto.dendrogram.merges {
        println!("  {:.4}  {}  {}", m.height, m.left, m.right);
    }
    println!("auto cut: k={} silhouette={:.3}", auto.cut.k, auto.cut.silhouette);

    for k in 2..=4 {
        let phase = cluster_topics(&ws, &spec, Linkage::Complete, CutSetting::K(k))?;
        let pred = FlatClustering::from_groups(phase.clusters.iter().map(|c| c.email_ids.clone()).collect());
        let q = quality(&pred, &gold)?;
        println!("k={k} rand={:.3} silhouette={:.3}", q.rand_index.unwrap_or_default(), phase.cut.silhouette);
        for c in &phase.clusters {
            println!("  topic {}: {:?}", c.cluster_id, c.email_ids);
        }
    }
    Ok(())
}
