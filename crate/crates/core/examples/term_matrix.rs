//! Fits the TF-IDF model and shows the strongest body terms of each email,
//! before and after the subject-term boost.
//!
//! cargo run --example term_matrix

use mailmine::ingest::{parse_csv, CsvSchema};
use mailmine::textprep::{BoostConfig, CleansingConfig, TermMatrix, TextModel};

fn top_terms(m: &TermMatrix, row: usize, n: usize) -> Vec<String> {
    let mut weights: Vec<(f64, &str)> =
        m.rows[row].to_dense().iter().zip(&m.vocabulary).filter(|(w, _)| **w > 0.0).map(|(w, t)| (*w, t.as_str())).collect();
    weights.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
    weights.iter().take(n).map(|(w, t)| format!("{t}:{w:.2}")).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = parse_csv(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.csv"), &CsvSchema::default())?;
    let cleansing = CleansingConfig::default();
    let (_, plain) = TextModel::fit(&corpus, &cleansing, &BoostConfig { subject_term_weight: 1.0 })?;
    let (model, boosted) = TextModel::fit(&corpus, &cleansing, &BoostConfig::default())?;
    println!(
        "{} documents, {} subject terms, {} body terms, boosted terms {:?}",
        boosted.body.n_docs(),
        boosted.subject.n_terms(),
        boosted.body.n_terms(),
        model.boost_terms
    );
    for (row, id) in boosted.body.doc_ids.iter().enumerate() {
        println!("{id:>3} plain   {}", top_terms(&plain.body, row, 4).join(" "));
        println!("    boosted {}", top_terms(&boosted.body, row, 4).join(" "));
    }
    Ok(())
}
