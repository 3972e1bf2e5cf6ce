use std::fs;
use std::path::Path;

use bpassist_cli::datagen::{answer, check_pin, pin, write_dataset, PinnedQuery, QueryCorpus};
use bpassist_core::agents::{build_world, WorldConfig};

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("documents")] {
        let mut names: Vec<_> = fs::read_dir(&sub).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_file()).collect();
        names.sort();
        for p in names {
            out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
        }
    }
    out
}

#[test]
fn same_seed_same_bytes() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let q = vec!["what is the average amount".to_string(), "top 3 borrowers".to_string()];
    let w = write_dataset(7, 40, a.path(), &q).unwrap();
    write_dataset(7, 40, b.path(), &q).unwrap();
    write_dataset(8, 40, c.path(), &q).unwrap();
    assert_eq!((w.loans, w.answers), (40, 2));
    assert!(w.documents > 0);
    assert_eq!(read_all(a.path()), read_all(b.path()));
    assert_ne!(read_all(a.path()), read_all(c.path()));
    let answers: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("answers.json")).unwrap()).unwrap();
    assert!(answers[0]["result"]["totalCount"].is_number(), "{answers}");
    assert!(answers[1]["parsed"]["Err"].is_string(), "{answers}");
}

#[test]
fn size_zero_writes_headers_only() {
    let dir = tempfile::tempdir().unwrap();
    let w = write_dataset(42, 0, dir.path(), &[]).unwrap();
    assert_eq!(w.loans, 0);
    let loans = fs::read_to_string(dir.path().join("loans.csv")).unwrap();
    assert_eq!(loans.lines().count(), 1);
    assert!(loans.starts_with("borrower,amount,"), "{loans}");
    assert_eq!(fs::read_to_string(dir.path().join("travel.csv")).unwrap().lines().count(), 1);
    assert!(!dir.path().join("answers.json").exists());
}

#[test]
fn pins_round_trip_and_report_differences() {
    let world = build_world(&WorldConfig { size: 50, ..WorldConfig::default() }).unwrap();
    let a = answer("List all borrowers with credit score less than 600", &world.dataset, &world.loan_schema);
    let p = pin(&a);
    assert!(check_pin(&p, &a).is_empty());
    let wrong = PinnedQuery { total: p.total.map(|t| t + 1), ..p.clone() };
    assert_eq!(check_pin(&wrong, &a), [format!("total: expected {}, got {}", p.total.unwrap() + 1, p.total.unwrap())]);
    let rejected = PinnedQuery { rejected: true, ..p };
    assert_eq!(check_pin(&rejected, &a), ["expected no answer"]);
}

#[test]
fn shipped_query_corpus_loads() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/queries.toml");
    let c = QueryCorpus::load(&path).unwrap();
    assert_eq!((c.seed, c.size), (42, 500));
    assert!(c.queries.len() >= 19);
}
