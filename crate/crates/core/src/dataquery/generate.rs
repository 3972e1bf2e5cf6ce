use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Table, TableSchema};
use crate::contract::{format_money, Cell};

/// People every generated dataset contains, so scripted conversations can
/// refer to them by name.
pub const FIXED_PEOPLE: [&str; 3] = ["John Smith", "V. Doe", "Y. Doe"];

const FIRST: [&str; 16] = [
    "Alice", "Bruno", "Carla", "Dev", "Elena", "Farid", "Grace", "Hiro", "Ines", "Jamal", "Kira",
    "Luis", "Mona", "Nils", "Olga", "Priya",
];
const LAST: [&str; 12] = [
    "Adams", "Baker", "Chen", "Diaz", "Evans", "Fischer", "Garcia", "Haddad", "Ito", "Jensen",
    "Kowalski", "Lopez",
];
const LOAN_STATUS: [&str; 4] = ["Approved", "Rejected", "Pending", "Referred"];
const DESTINATIONS: [&str; 6] = [
    "Headquarters",
    "Boston",
    "New York",
    "San Francisco",
    "London",
    "Toronto",
];
const EVENTS: [&str; 4] = [
    "Loan procedures training",
    "Client meeting",
    "Academic conference",
    "Risk workshop",
];
const TRAVEL_STATE: [&str; 4] = ["PendingManager", "PendingDirector", "Approved", "Rejected"];

/// Days from 1970-01-01 to 2019-01-01.
const EPOCH_2019: i64 = 17_897;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub seed: u64,
    pub size: usize,
    pub credit_score_range: (u32, u32),
    pub people: usize,
}

impl DatasetConfig {
    pub fn new(seed: u64, size: usize) -> Self {
        Self {
            seed,
            size,
            credit_score_range: (300, 850),
            people: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub loans: Table,
    pub travel: Table,
    /// Sample loan documents, name to key:value text.
    pub documents: BTreeMap<String, String>,
    pub people: Vec<String>,
}

/// Proleptic Gregorian (year, month, day) for days since 1970-01-01.
pub fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    let y = yoe + era * 400 + i64::from(m <= 2);
    (y, m, d)
}

/// Deterministic synthetic loan and travel data. `size` loan rows, a fifth
/// as many travel requests, and up to five loan documents.
pub fn generate_dataset(
    config: &DatasetConfig,
    loan_schema: &TableSchema,
    travel_schema: &TableSchema,
) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut people: Vec<String> = FIXED_PEOPLE.iter().map(|s| s.to_string()).collect();
    let mut attempts = 0;
    while people.len() < config.people.max(FIXED_PEOPLE.len()) && attempts < 10_000 {
        attempts += 1;
        let name = format!(
            "{} {}",
            FIRST.choose(&mut rng).expect("non-empty"),
            LAST.choose(&mut rng).expect("non-empty")
        );
        if !people.contains(&name) {
            people.push(name);
        }
    }

    let (lo, hi) = config.credit_score_range;
    let mut loan_rows = Vec::with_capacity(config.size);
    for _ in 0..config.size {
        let borrower = people.choose(&mut rng).expect("non-empty").clone();
        let amount = f64::from(rng.random_range(100..=10_000u32) * 100);
        let income = f64::from(rng.random_range(200..=2_500u32) * 100);
        let score = f64::from(rng.random_range(lo..=hi));
        let (y, m, d) = civil_from_days(EPOCH_2019 + rng.random_range(0..730i64));
        let status = *LOAN_STATUS.choose(&mut rng).expect("non-empty");
        loan_rows.push(vec![
            Cell::Text(borrower),
            Cell::Number(amount),
            Cell::Number(income),
            Cell::Number(score),
            Cell::Text(format!("{y:04}-{m:02}-{d:02}")),
            Cell::Text(status.to_string()),
        ]);
    }

    let mut travel_rows = Vec::new();
    for _ in 0..config.size / 5 {
        let employee = people.choose(&mut rng).expect("non-empty").clone();
        travel_rows.push(vec![
            Cell::Text(employee),
            Cell::Text(DESTINATIONS.choose(&mut rng).expect("non-empty").to_string()),
            Cell::Text(EVENTS.choose(&mut rng).expect("non-empty").to_string()),
            Cell::Number(f64::from(rng.random_range(300..=5_000u32))),
            Cell::Text(TRAVEL_STATE.choose(&mut rng).expect("non-empty").to_string()),
        ]);
    }

    let mut documents = BTreeMap::new();
    for (i, row) in loan_rows.iter().take(5).enumerate() {
        let text = format!(
            "Borrower: {}\nLoan Amount: {}\nYearly Income: {}\nCredit Score: {}\nSubmitted: {}\n",
            row[0],
            format_money(row[1].as_f64().unwrap_or(0.0)),
            format_money(row[2].as_f64().unwrap_or(0.0)),
            row[3],
            row[4],
        );
        documents.insert(format!("loan_{:04}.txt", i + 1), text);
    }

    let build = |schema: &TableSchema, rows| {
        Table::new(schema.table.clone(), schema.columns(), rows).expect("generated rows match schema")
    };
    Dataset {
        loans: build(loan_schema, loan_rows),
        travel: build(travel_schema, travel_rows),
        documents,
        people,
    }
}
