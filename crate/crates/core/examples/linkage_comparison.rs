//! Compares single, complete and average linkage on the topic phase.
//!
//! cargo run --example linkage_comparison

use mailmine::cluster::{quality, DistanceSpec, FlatClustering, Linkage};
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::pipeline::{cluster_topics, CutSetting, Workspace};
use mailmine::textprep::{BoostConfig, CleansingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let ws = Workspace::new(corpus, &CleansingConfig::default(), &BoostConfig::default())?;
    let gold = FlatClustering::from_groups(vec![vec![1, 2, 3, 4, 16, 20, 21, 22, 23], (5..=15).collect()]);
    for linkage in Linkage::ALL {
        let phase = cluster_topics(&ws, &DistanceSpec::topic_default(), linkage, CutSetting::K(2))?;
        let pred = FlatClustering::from_groups(phase.clusters.iter().map(|c| c.email_ids.clone()).collect());
        let q = quality(&pred, &gold)?;
        let top = phase.dendrogram.merges.last().map(|m| m.height).unwrap_or_default();
        println!(
            "{linkage:?}: rand={:.3} purity={:.3} silhouette={:.3} root height={top:.3}",
            q.rand_index.unwrap_or_default(),
            q.purity.unwrap_or_default(),
            phase.cut.silhouette
        );
        for c in &phase.clusters {
            println!("  {:?}", c.email_ids);
        }
    }
    Ok(())
}
