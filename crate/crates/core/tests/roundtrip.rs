mod common;

use chrono::{FixedOffset, TimeZone};
use mailmine::export::{self, build_event_log};
use mailmine::ingest::{self, Corpus, CsvSchema, Email};
use mailmine::run::Run;
use proptest::prelude::*;

fn corpus_csv(corpus: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    ingest::write_csv(corpus, &CsvSchema::default(), &mut buf).unwrap();
    buf
}

fn address() -> impl Strategy<Value = String> {
    "[a-z][a-z.]{0,8}@[a-z]{1,6}\\.(org|fr|com)"
}

fn email(id: u64) -> impl Strategy<Value = Email> {
    (
        address(),
        prop::collection::vec(address(), 1..4),
        "[ -~]{0,30}",
        "([ -~]|\n|é|ü|\"){0,120}",
        0i64..4_000_000_000,
        prop_oneof![Just(0i32), -12i32..=14].prop_map(|h| h * 3600),
    )
        .prop_map(move |(sender, receivers, subject, body, secs, offset)| Email {
            id,
            sender,
            receivers,
            subject,
            body,
            timestamp: FixedOffset::east_opt(offset).unwrap().timestamp_opt(secs, 0).unwrap(),
        })
}

fn corpus() -> impl Strategy<Value = Corpus> {
    (1usize..8)
        .prop_flat_map(|n| (0..n as u64).map(|i| email(i + 1)).collect::<Vec<_>>())
        .prop_map(|emails| Corpus::new(emails, "generated").unwrap())
}

proptest! {
    #[test]
    fn corpus_csv_write_read_write_is_byte_identical(corpus in corpus()) {
        let first = corpus_csv(&corpus);
        let read = ingest::read_csv(first.as_slice(), &CsvSchema::default(), "generated").unwrap();
        prop_assert_eq!(&read.emails, &corpus.emails);
        prop_assert_eq!(corpus_csv(&read), first);
    }
}

#[test]
fn fixture_corpus_round_trips() {
    let corpus = common::table1();
    let first = corpus_csv(&corpus);
    let read = ingest::read_csv(first.as_slice(), &CsvSchema::default(), "x").unwrap();
    assert_eq!(corpus_csv(&read), first);
    assert_eq!(read.digest(), corpus.digest());
}

#[test]
fn run_json_round_trips_at_every_phase() {
    let mut run = Run::new(common::table1(), Default::default()).unwrap();
    let check = |run: &Run| {
        let text = run.to_json();
        let back = Run::from_json(&text).unwrap();
        assert_eq!(back.to_json(), text);
    };
    check(&run);
    run.run_topics(None).unwrap();
    check(&run);
    run.run_instances(None, None).unwrap();
    check(&run);
    run.run_activities(None, None, None).unwrap();
    check(&run);
    let labeled = common::labeled_run();
    check(&labeled);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    labeled.save(&path).unwrap();
    let first = std::fs::read(&path).unwrap();
    Run::load(&path).unwrap().save(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn tampered_run_file_is_rejected() {
    let run = common::mission_run();
    let text = run.to_json().replacen("Urrugne", "Biarritz", 1);
    assert!(Run::from_json(&text).is_err());
}

#[test]
fn event_log_csv_round_trips() {
    let run = common::labeled_run();
    let log = build_event_log(&run, 1).unwrap();
    let mut first = Vec::new();
    export::write_csv(&log, &mut first).unwrap();
    let read = export::read_csv(first.as_slice(), 1).unwrap();
    let mut second = Vec::new();
    export::write_csv(&read, &mut second).unwrap();
    assert_eq!(second, first);
    assert_eq!(read.records.len(), 9);
}
