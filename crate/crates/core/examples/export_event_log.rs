//! Builds the mission event log and writes it as CSV, XES and a
//! directly-follows graph in DOT.
//!
//! cargo run --example export_event_log -- [output-dir]

use mailmine::config::PipelineConfig;
use mailmine::export::{build_event_log, mine_dfg, to_dot, validate_xes, write_csv, write_xes};
use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::pipeline::CutSetting;
use mailmine::run::Run;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let corpus = parse_csv(format!("{dir}/fixtures/table1.csv"), &CsvSchema::default())?;
    let mut run = Run::new(corpus, PipelineConfig::default())?;
    run.run_topics(Some(CutSetting::K(2)))?;
    run.run_instances(None, None)?;
    run.run_activities(Some(4), Some(1), None)?;
    run.load_labels(std::fs::File::open(format!("{dir}/fixtures/labels.csv"))?)?;

    let log = build_event_log(&run, 1)?;
    let mut csv = Vec::new();
    write_csv(&log, &mut csv)?;
    let xes = write_xes(&log);
    let summary = validate_xes(&xes)?;
    let dfg = mine_dfg(&log)?;
    println!("{} cases, {} events, lifecycles {:?}", summary.traces, summary.events, summary.lifecycles);
    for ((a, b), n) in &dfg.edges {
        println!("  {a} -> {b}: {n}");
    }

    match std::env::args().nth(1) {
        Some(out) => {
            let out = std::path::Path::new(&out);
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("mission.csv"), &csv)?;
            std::fs::write(out.join("mission.xes"), &xes)?;
            std::fs::write(out.join("mission.dot"), to_dot(&dfg))?;
            println!("wrote mission.csv, mission.xes and mission.dot to {}", out.display());
        }
        None => print!("{}", String::from_utf8(csv)?),
    }
    Ok(())
}
