//! Loads an email corpus from CSV or mbox and prints what was read.
//!
//! cargo run --example ingest_corpus -- [path.csv|path.mbox]

use mailmine::ingest::{parse_csv, parse_mbox, CsvSchema};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv").to_string());
    let corpus = if path.ends_with(".mbox") {
        parse_mbox(&path)?
    } else {
        parse_csv(&path, &CsvSchema::default())?
    };
    println!("{} emails from {}", corpus.len(), corpus.source_descriptor);
    println!("digest {}", corpus.digest());
    for e in &corpus.emails {
        println!("{:>3}  {}  {:<28} {}", e.id, e.timestamp.format("%Y-%m-%d %H:%M"), e.sender, e.subject);
    }
    for w in &corpus.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
