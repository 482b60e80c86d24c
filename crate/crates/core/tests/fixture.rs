mod common;

use std::collections::{BTreeSet, HashMap};

use common::{alias_pairs, alias_set, golden, nested_loop_count, raw_tables, ws_normalize};
use denorm_core::{
    all_simple_paths, emit_count_sql, emit_sql, import_declared_fks, infer_links_by_name,
    paths_between, reachable, reduce_paths, ColumnClass, ColumnRef, Dataset, Dialect, Filter,
    IngestOptions, JoinType, QueryRequest, QuerySpec, QueryTemplate, ResolutionPolicy, Resolver,
    RowCounter, SqliteIntrospector, TableRef, Value,
};
use sqlparser::dialect::SQLiteDialect;
use sqlparser::parser::Parser;

const COVERING_JOIN_SQL: &str = "FROM order_details JOIN orders ON order_details.orderID = orders.orderID JOIN customers ON orders.customerID = customers.customerID JOIN products ON order_details.productID = products.productID JOIN suppliers ON products.supplierID = suppliers.supplierID JOIN categories ON products.categoryID = categories.categoryID";

fn spec(seq: &denorm_core::JoinSequence, select: &[&str], join_type: JoinType) -> QuerySpec {
    QuerySpec {
        sequence: seq.clone(),
        select: select.iter().map(|s| s.parse().unwrap()).collect(),
        filters: vec![],
        join_type,
    }
}

fn parses(sql: &str) {
    Parser::parse_sql(&SQLiteDialect {}, sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
}

#[test]
fn graph_has_eleven_tables_and_classified_edges() {
    let ws = common::northwind();
    assert_eq!(ws.graph().node_count(), 11);

    // Edge count straight from the metadata file: M-1 gives one edge, 1-1 two, M-M none.
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(common::fixture_dir().join("links.json")).unwrap(),
    )
    .unwrap();
    let class_of: HashMap<(String, String), String> = doc["tables"]
        .as_array()
        .unwrap()
        .iter()
        .flat_map(|t| {
            let name = t["name"].as_str().unwrap().to_owned();
            t["columns"].as_array().unwrap().iter().map(move |c| {
                (
                    (name.clone(), c["name"].as_str().unwrap().to_owned()),
                    c["class"].as_str().unwrap_or("").to_owned(),
                )
            })
        })
        .collect();
    let endpoint_class = |s: &str| {
        let (t, c) = s.split_once('.').unwrap();
        class_of[&(t.to_owned(), c.to_owned())].clone()
    };
    let expected: usize = doc["links"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| {
            let left = l["left_class"]
                .as_str()
                .map(str::to_owned)
                .unwrap_or_else(|| endpoint_class(l["left"].as_str().unwrap()));
            let right = l["right_class"]
                .as_str()
                .map(str::to_owned)
                .unwrap_or_else(|| endpoint_class(l["right"].as_str().unwrap()));
            match (left.as_str(), right.as_str()) {
                ("one", "one") => 2,
                ("many", "many") => 0,
                _ => 1,
            }
        })
        .sum();
    assert_eq!(ws.graph().edges().len(), expected);
    assert_eq!(expected, golden()["edge_count"].as_u64().unwrap() as usize);

    let summary = ws.graph().summary();
    assert_eq!((summary.node_count, summary.edge_count), (11, expected));
    let export = ws.graph().export();
    assert_eq!((export.nodes.len(), export.edges.len()), (11, expected));
}

#[test]
fn attested_edges_present() {
    let ws = common::northwind();
    let have: BTreeSet<(String, String)> = ws
        .graph()
        .edges()
        .iter()
        .map(|e| {
            let a = |t: &TableRef| ws.aliases().alias_of(t.as_str()).unwrap().to_owned();
            (a(&e.from), a(&e.to))
        })
        .collect();
    for pair in [
        "ORS ORD", "ORD CU", "ORD EM", "ORS PR", "ORS VE", "PR SU", "PR VE", "PR CA", "VE SU",
        "ET EM", "ET TE", "TE RE",
    ] {
        let (a, b) = pair.split_once(' ').unwrap();
        assert!(
            have.contains(&(a.to_owned(), b.to_owned())),
            "missing {pair}"
        );
    }
    let dot = ws.graph().to_dot();
    assert_eq!(
        dot.lines()
            .filter(|l| l.trim_end().ends_with("\";") && !l.contains("->"))
            .count(),
        11
    );
}

#[test]
fn reachability_on_fixture() {
    let ws = common::northwind();
    let g = ws.graph();
    let r = |a: &str, b: &str| reachable(g, ws.table(a).as_str(), ws.table(b).as_str()).unwrap();
    assert!(!r("ORD", "SU"));
    assert!(r("ORS", "CA"));
    assert!(r("ET", "RE"));
    assert!(!r("SU", "PR"));
}

#[test]
fn paths_to_suppliers_are_reduced() {
    let ws = common::northwind();
    let (src, dst) = (ws.table("ORS"), ws.table("SU"));
    let all = all_simple_paths(ws.graph(), src.as_str(), dst.as_str(), 10).unwrap();
    let chains: Vec<String> = all.paths.iter().map(|p| p.chain()).collect();
    assert_eq!(chains.len(), 3, "{chains:?}");
    let reduced = reduce_paths(&src, &dst, all.paths).unwrap();
    let kept: BTreeSet<String> = reduced.paths.iter().map(|p| p.chain()).collect();
    assert_eq!(
        kept,
        BTreeSet::from([
            "order_details→products→suppliers".to_owned(),
            "order_details→vendors→suppliers".to_owned(),
        ])
    );

    let one = paths_between(ws.graph(), "orders", "customers", 10, None).unwrap();
    assert_eq!(one.paths.len(), 1);
    assert_eq!(one.paths[0].chain(), "orders→customers");
    assert!(paths_between(ws.graph(), "orders", "suppliers", 10, None)
        .unwrap()
        .is_empty());
}

#[test]
fn covering_sequence_and_sql() {
    let ws = common::northwind();
    let r = ws
        .plan(&["customers", "suppliers", "categories"], None, None)
        .unwrap();
    assert_eq!(r.sequences.len(), 1);
    let seq = &r.sequences[0];
    assert_eq!(seq.origin.as_str(), "order_details");
    let expected: Vec<(String, String)> = [
        ("ORS", "ORD"),
        ("ORD", "CU"),
        ("ORS", "PR"),
        ("PR", "SU"),
        ("PR", "CA"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    assert_eq!(alias_pairs(&ws, seq), expected);

    let q = emit_sql(&spec(seq, &[], JoinType::Inner), &Dialect::SQLITE).unwrap();
    let text = ws_normalize(&q.text);
    assert_eq!(text, format!("SELECT * {COVERING_JOIN_SQL}"));
    parses(&q.text);

    let rows = ws.dataset().unwrap().query(&q).unwrap();
    let expected_rows = golden()["customers_suppliers_categories_rows"]
        .as_u64()
        .unwrap();
    assert_eq!(rows.rows.len() as u64, expected_rows);
    assert_eq!(nested_loop_count(&raw_tables(), seq), expected_rows);

    // Same answer through aliases.
    let via_alias = ws.plan(&["CU", "SU", "CA"], None, None).unwrap();
    assert_eq!(via_alias.sequences, r.sequences);
}

#[test]
fn two_sequences_without_categories() {
    let ws = common::northwind();
    let r = ws.plan(&["CU", "SU"], None, None).unwrap();
    let sets: BTreeSet<Vec<String>> = r.sequences.iter().map(|s| alias_set(&ws, s)).collect();
    let want = |v: &[&str]| {
        let mut v: Vec<String> = v.iter().map(|s| s.to_string()).collect();
        v.sort();
        v
    };
    assert_eq!(
        sets,
        BTreeSet::from([
            want(&["ORS", "ORD", "CU", "PR", "SU"]),
            want(&["ORS", "ORD", "CU", "VE", "SU"])
        ])
    );
}

#[test]
fn territories_and_orders_do_not_join() {
    let ws = common::northwind();
    let r = ws.plan(&["TE", "ORD"], None, None).unwrap();
    assert!(r.sequences.is_empty());
    assert!(!denorm_core::joinable(ws.graph(), &ws.targets(&["TE", "ORD"])).unwrap());
    let err = ws
        .query(
            &QueryRequest {
                select: vec![
                    "TE.territoryDescription".parse().unwrap(),
                    "ORD.orderDate".parse().unwrap(),
                ],
                ..Default::default()
            },
            None,
        )
        .unwrap_err();
    assert_eq!(err.code(), "NoJoinPath");
}

#[test]
fn ingestion_counts_and_scans() {
    let (ds, skeleton) = Dataset::ingest_csv_dir(common::fixture_dir()).unwrap();
    let raw = raw_tables();
    let g = golden();
    assert_eq!(ds.tables().len(), 11);
    assert_eq!(skeleton.tables().len(), 11);
    for t in ds.tables() {
        let expected = raw[t.name.as_str()].rows.len() as u64;
        assert_eq!(t.row_count, expected, "{}", t.name);
        assert_eq!(g["row_counts"][t.name.as_str()].as_u64(), Some(expected));
        let n = ds
            .execute(&format!("SELECT COUNT(*) FROM \"{}\"", t.name), &[])
            .unwrap();
        assert_eq!(n.rows[0][0], Value::Integer(expected as i64));
        for c in &t.columns {
            let col = ColumnRef::new(t.name.clone(), &c.name);
            assert_eq!(ds.scan_column(&col).unwrap().len() as u64, expected);
        }
    }

    let class = |c: &str| ds.uniqueness(&c.parse().unwrap()).unwrap().inferred_class;
    assert_eq!(class("suppliers.supplierID"), ColumnClass::One);
    assert_eq!(class("order_details.productID"), ColumnClass::Many);
    assert_eq!(class("customers.customerID"), ColumnClass::One);

    let vendor = ds
        .uniqueness(&"products.vendorID".parse().unwrap())
        .unwrap();
    let raw_nulls = raw["products"]
        .rows
        .iter()
        .filter(|r| r[raw["products"].col("vendorID")].is_empty())
        .count();
    assert_eq!(vendor.null_count as usize, raw_nulls);

    let (again, skeleton2) = Dataset::ingest_csv_dir(common::fixture_dir()).unwrap();
    assert_eq!(again.tables(), ds.tables());
    assert_eq!(skeleton2, skeleton);
}

#[test]
fn name_inference_covers_curated_links() {
    let ws = common::northwind();
    let (ds, skeleton) = Dataset::ingest_csv_dir(common::fixture_dir()).unwrap();
    let (classified, _) = ds.classify(&skeleton).unwrap();
    let proposed =
        infer_links_by_name(&classified, |c| classified.column(c).and_then(|c| c.class)).unwrap();
    let endpoints = |l: &denorm_core::Link| (l.left.to_string(), l.right.to_string());
    let connectable: BTreeSet<_> = proposed
        .iter()
        .filter(|l| l.kind.is_connectable())
        .map(endpoints)
        .collect();
    let curated: BTreeSet<_> = ws.catalog().links().iter().map(endpoints).collect();
    assert_eq!(connectable, curated);
    assert!(proposed
        .iter()
        .any(|l| !l.kind.is_connectable() && l.left.column.as_ref() == "supplierID"));
}

#[test]
fn declared_foreign_keys_import() {
    let ws = common::northwind();
    let (ds, _) = Dataset::ingest_csv_dir_with(
        common::fixture_dir(),
        &IngestOptions {
            declare: Some(ws.catalog()),
        },
    )
    .unwrap();
    let key =
        |l: &denorm_core::Link| (l.left.to_string(), l.right.to_string(), l.mandatory, l.kind);
    let curated: BTreeSet<_> = ws.catalog().links().iter().map(key).collect();

    let imported = import_declared_fks(&ds).unwrap();
    assert!(imported.skipped.is_empty());
    assert_eq!(
        imported.links.iter().map(key).collect::<BTreeSet<_>>(),
        curated
    );

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("northwind.sqlite");
    ds.export_sqlite(&file).unwrap();
    let from_file = import_declared_fks(&SqliteIntrospector::open(&file).unwrap()).unwrap();
    assert_eq!(
        from_file.links.iter().map(key).collect::<BTreeSet<_>>(),
        curated
    );
}

#[test]
fn every_fixture_plan_emits_runnable_sql() {
    let ws = common::northwind();
    let raw = raw_tables();
    let names: Vec<String> = ws
        .catalog()
        .tables()
        .iter()
        .map(|t| t.name.to_string())
        .collect();
    let mut sequences = 0;
    for (i, a) in names.iter().enumerate() {
        for b in &names[i..] {
            for seq in ws.plan(&[a, b], None, None).unwrap().sequences {
                sequences += 1;
                for jt in [JoinType::Inner, JoinType::Left] {
                    let q = emit_sql(&spec(&seq, &[], jt), &Dialect::SQLITE).unwrap();
                    parses(&q.text);
                    let rows = ws.dataset().unwrap().query(&q).unwrap();
                    if jt == JoinType::Inner {
                        assert_eq!(
                            rows.rows.len() as u64,
                            nested_loop_count(&raw, &seq),
                            "{}",
                            q.text
                        );
                    }
                    let ansi = emit_sql(&spec(&seq, &[], jt), &Dialect::ANSI).unwrap();
                    parses(&ansi.text);
                    assert_eq!(ws.dataset().unwrap().query(&ansi).unwrap(), rows);
                }
            }
        }
    }
    assert!(sequences > 20, "{sequences}");
}

#[test]
fn resolution_policies_on_fixture() {
    let ws = common::northwind();
    let ds = ws.dataset().unwrap();
    let seqs = ws.plan(&["CU", "SU"], None, None).unwrap().sequences;
    assert_eq!(seqs.len(), 2);
    let raw = raw_tables();
    let counts = &golden()["customers_suppliers_counts"];
    let link_of = |s: &denorm_core::JoinSequence| s.steps[2].link_id.to_string();
    for s in &seqs {
        assert_eq!(
            Some(nested_loop_count(&raw, s)),
            counts[link_of(s)].as_u64()
        );
    }

    let template = QueryTemplate {
        select: vec![
            "customers.companyName".parse().unwrap(),
            "suppliers.supplierName".parse().unwrap(),
        ],
        filters: vec![],
        join_type: JoinType::Inner,
    };
    let resolver = Resolver::new(ws.catalog()).with_executor(ds);

    let all = resolver
        .resolve(&seqs, ResolutionPolicy::All, &template)
        .unwrap();
    assert_eq!(all.specs.len(), 2);

    let most = resolver
        .resolve(&seqs, ResolutionPolicy::MostRows, &template)
        .unwrap();
    assert_eq!(most.specs.len(), 1);
    let best = counts
        .as_object()
        .unwrap()
        .iter()
        .max_by_key(|(_, v)| v.as_u64())
        .unwrap()
        .0;
    assert_eq!(&link_of(&most.specs[0].sequence), best);
    let reported = most.row_counts.clone().unwrap();
    assert_eq!(
        reported,
        seqs.iter()
            .map(|s| counts[link_of(s)].as_u64().unwrap())
            .collect::<Vec<_>>()
    );

    let mandatory = resolver
        .resolve(&seqs, ResolutionPolicy::PreferMandatory, &template)
        .unwrap();
    assert_eq!(mandatory.specs.len(), 1);
    assert_eq!(
        link_of(&mandatory.specs[0].sequence),
        "order_details__products"
    );

    let union = resolver
        .resolve(&seqs, ResolutionPolicy::UnionDistinct, &template)
        .unwrap();
    let u = union.union.clone().unwrap();
    assert_eq!(u.text.matches(" UNION ").count(), 1);
    parses(&u.text);
    let union_rows = ds.query(&u).unwrap();
    let mut distinct = BTreeSet::new();
    for s in &union.specs {
        for row in ds
            .query(&emit_sql(s, &Dialect::SQLITE).unwrap())
            .unwrap()
            .rows
        {
            distinct.insert(format!("{row:?}"));
        }
    }
    assert_eq!(union_rows.rows.len(), distinct.len());

    let bad = QueryTemplate {
        select: vec![],
        ..template.clone()
    };
    assert_eq!(
        resolver
            .resolve(&seqs, ResolutionPolicy::UnionDistinct, &bad)
            .unwrap_err()
            .code(),
        "ColumnMismatch"
    );
    let products_only = QueryTemplate {
        select: vec!["products.productName".parse().unwrap()],
        ..template.clone()
    };
    assert_eq!(
        resolver
            .resolve(&seqs, ResolutionPolicy::UnionDistinct, &products_only)
            .unwrap_err()
            .code(),
        "ColumnMismatch"
    );
    assert_eq!(
        Resolver::new(ws.catalog())
            .resolve(&seqs, ResolutionPolicy::MostRows, &template)
            .unwrap_err()
            .code(),
        "ExecutorRequired"
    );

    let single = ws.plan(&["CU", "SU", "CA"], None, None).unwrap().sequences;
    for policy in [
        ResolutionPolicy::All,
        ResolutionPolicy::UnionDistinct,
        ResolutionPolicy::MostRows,
        ResolutionPolicy::PreferMandatory,
    ] {
        let r = resolver.resolve(&single, policy, &template).unwrap();
        assert_eq!(r.specs, vec![template.spec_for(&single[0])]);
        assert!(r.union.is_none());
    }
}

#[test]
fn query_with_filters_and_limit() {
    let ws = common::northwind();
    let raw = raw_tables();
    let country = raw["customers"].rows[0][raw["customers"].col("country")].clone();
    let request = QueryRequest {
        select: vec![
            "CU.companyName".parse().unwrap(),
            "SU.supplierName".parse().unwrap(),
            "CA.categoryName".parse().unwrap(),
        ],
        filters: vec![Filter::eq("CU.country".parse().unwrap(), country.as_str())],
        limit: Some(3),
        ..Default::default()
    };
    let out = ws.query(&request, None).unwrap();
    assert_eq!(out.sequences.len(), 1);
    assert_eq!(out.results.len(), 1);
    let result = &out.results[0];
    assert_eq!(
        result.rows.columns,
        ["companyName", "supplierName", "categoryName"]
    );
    assert!(result.rows.rows.len() <= 3);
    assert_eq!(result.params, [Value::Text(country.clone())]);

    // Reference count: covering sequence restricted to customers from that country.
    let customers: BTreeSet<&str> = raw["customers"]
        .rows
        .iter()
        .filter(|r| r[raw["customers"].col("country")] == country)
        .map(|r| r[raw["customers"].col("customerID")].as_str())
        .collect();
    let orders: BTreeSet<&str> = raw["orders"]
        .rows
        .iter()
        .filter(|r| customers.contains(r[raw["orders"].col("customerID")].as_str()))
        .map(|r| r[raw["orders"].col("orderID")].as_str())
        .collect();
    let expected = raw["order_details"]
        .rows
        .iter()
        .filter(|r| orders.contains(r[raw["order_details"].col("orderID")].as_str()))
        .count();
    assert!(expected > 0);
    assert_eq!(result.total_rows, expected as u64);

    let count = emit_count_sql(
        &QuerySpec {
            sequence: out.sequences[0].clone(),
            select: vec![],
            filters: request
                .filters
                .iter()
                .map(|f| Filter {
                    column: ws.column(&f.column),
                    ..f.clone()
                })
                .collect(),
            join_type: JoinType::Inner,
        },
        &Dialect::SQLITE,
    )
    .unwrap();
    assert_eq!(
        ws.dataset().unwrap().count_rows(&count).unwrap(),
        expected as u64
    );
}

#[test]
fn cache_is_transparent() {
    let ws = common::northwind();
    let first = ws.plan(&["CU", "SU", "CA"], None, None).unwrap();
    let second = ws.plan(&["CU", "SU", "CA"], None, None).unwrap();
    assert_eq!(
        serde_json::to_string(&first.sequences).unwrap(),
        serde_json::to_string(&second.sequences).unwrap()
    );
    assert_eq!(first.diagnostics.cache_hits, 0);
    assert!(second.diagnostics.cache_hits > 0);
    assert_eq!(second.diagnostics.cache_misses, 0);

    let cold = common::northwind()
        .plan(&["CU", "SU", "CA"], None, None)
        .unwrap();
    assert_eq!(cold.to_json(), first.to_json());
}
