#![allow(dead_code)]

pub mod oracle;

use std::collections::HashMap;
use std::path::PathBuf;

use denorm_core::{JoinSequence, Workspace, WorkspacePaths};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/northwind")
}

pub fn northwind() -> Workspace {
    Workspace::open(&WorkspacePaths::data_dir(fixture_dir())).expect("fixture loads")
}

pub fn golden() -> serde_json::Value {
    let text = std::fs::read_to_string(fixture_dir().join("golden.json")).expect("golden file");
    serde_json::from_str(&text).expect("golden json")
}

/// One CSV file read as plain strings, without any engine code.
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn col(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }
}

pub fn raw_tables() -> HashMap<String, RawTable> {
    let mut out = HashMap::new();
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path).unwrap();
        let header = reader
            .headers()
            .unwrap()
            .iter()
            .map(str::to_owned)
            .collect();
        let rows = reader
            .records()
            .map(|r| r.unwrap().iter().map(str::to_owned).collect())
            .collect();
        let name = path.file_stem().unwrap().to_str().unwrap().to_owned();
        out.insert(name, RawTable { header, rows });
    }
    out
}

/// Inner-join row count of a sequence by nested loops over the raw CSV
/// strings. Empty fields are missing values and never match.
pub fn nested_loop_count(tables: &HashMap<String, RawTable>, seq: &JoinSequence) -> u64 {
    let origin = seq.origin.as_str();
    let mut bound: Vec<&str> = vec![origin];
    let mut tuples: Vec<Vec<usize>> = (0..tables[origin].rows.len()).map(|i| vec![i]).collect();
    for step in &seq.steps {
        let from_t = step.from.table.as_str();
        let to_t = step.to.table.as_str();
        let from_pos = bound
            .iter()
            .position(|t| *t == from_t)
            .expect("from table bound");
        let from_col = tables[from_t].col(&step.from.column);
        let to_col = tables[to_t].col(&step.to.column);
        let key = |tuple: &Vec<usize>| tables[from_t].rows[tuple[from_pos]][from_col].clone();
        if let Some(to_pos) = bound.iter().position(|t| *t == to_t) {
            tuples.retain(|tup| {
                let k = key(tup);
                !k.is_empty() && k == tables[to_t].rows[tup[to_pos]][to_col]
            });
            continue;
        }
        let mut next = Vec::new();
        for tup in &tuples {
            let k = key(tup);
            if k.is_empty() {
                continue;
            }
            for (j, row) in tables[to_t].rows.iter().enumerate() {
                if row[to_col] == k {
                    let mut t = tup.clone();
                    t.push(j);
                    next.push(t);
                }
            }
        }
        bound.push(to_t);
        tuples = next;
    }
    tuples.len() as u64
}

pub fn pairs(seq: &JoinSequence) -> Vec<(String, String)> {
    seq.pairs()
        .into_iter()
        .map(|(a, b)| (a.to_owned(), b.to_owned()))
        .collect()
}

/// Table names rewritten to their fixture aliases.
pub fn alias_pairs(ws: &Workspace, seq: &JoinSequence) -> Vec<(String, String)> {
    let a = |t: &str| ws.aliases().alias_of(t).unwrap_or(t).to_owned();
    seq.pairs().into_iter().map(|(x, y)| (a(x), a(y))).collect()
}

pub fn alias_set(ws: &Workspace, seq: &JoinSequence) -> Vec<String> {
    let mut v: Vec<String> = seq
        .tables()
        .iter()
        .map(|t| {
            ws.aliases()
                .alias_of(t.as_str())
                .unwrap_or(t.as_str())
                .to_owned()
        })
        .collect();
    v.sort();
    v
}

pub fn ws_normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
