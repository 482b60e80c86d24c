//! Synthetic schemas for benchmarking.

use std::path::PathBuf;

use denorm_core::{Catalog, ColumnClass, LinkDraft};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/northwind")
}

/// A snowflake-like schema: table `t{i}` holds many-to-one links to earlier
/// tables, so the graph is acyclic and `t{n-1}` reaches most of it.
/// `extra` adds that many random links on top of the spanning chain.
pub fn layered_catalog(tables: usize, extra: usize, seed: u64) -> Catalog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut links: Vec<(usize, usize)> = (1..tables).map(|i| (i, rng.gen_range(0..i))).collect();
    for _ in 0..extra {
        let from = rng.gen_range(1..tables);
        links.push((from, rng.gen_range(0..from)));
    }

    let mut catalog = Catalog::new();
    for t in 0..tables {
        let mut cols = vec![("id".to_owned(), ColumnClass::One)];
        for (k, &(from, _)) in links.iter().enumerate() {
            if from == t {
                cols.push((format!("fk{k}"), ColumnClass::Many));
            }
        }
        catalog = catalog
            .with_table(format!("t{t}"), cols.iter().map(|(n, c)| (n.as_str(), *c)))
            .expect("fresh table");
    }
    for (k, &(from, to)) in links.iter().enumerate() {
        let draft = LinkDraft::new(
            format!("t{from}.fk{k}").parse().expect("column ref"),
            format!("t{to}.id").parse().expect("column ref"),
        );
        catalog = catalog.add_link(draft).expect("valid link");
    }
    catalog
}
