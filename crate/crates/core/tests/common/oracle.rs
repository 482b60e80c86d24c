//! Random link catalogs and a deliberately naive reference planner.
//!
//! The reference planner shares no code with the engine: edges come straight
//! from the endpoint classes, simple paths are found by trying every ordering
//! of intermediate tables, and both reduction steps compare each item with
//! every earlier item of the sorted list.

use std::collections::BTreeSet;

use denorm_core::{Catalog, Column, ColumnClass, LinkDraft, PlanResult};
use itertools::Itertools;
use proptest::prelude::*;

#[derive(Clone, Debug)]
pub struct LinkSpec {
    pub left: usize,
    pub right: usize,
    pub left_class: ColumnClass,
    pub right_class: ColumnClass,
}

#[derive(Clone, Debug)]
pub struct Case {
    pub nodes: usize,
    pub links: Vec<LinkSpec>,
    pub targets: Vec<usize>,
}

pub const MAX_NODES: usize = 6;
pub const MAX_EDGES: usize = 10;
pub const MAX_TARGETS: usize = 3;

fn class() -> impl Strategy<Value = ColumnClass> {
    prop_oneof![Just(ColumnClass::One), Just(ColumnClass::Many)]
}

fn edge_count(l: &LinkSpec) -> usize {
    match (l.left_class, l.right_class) {
        (ColumnClass::One, ColumnClass::One) => 2,
        (ColumnClass::Many, ColumnClass::Many) => 0,
        _ => 1,
    }
}

pub fn case() -> impl Strategy<Value = Case> {
    (1..=MAX_NODES)
        .prop_flat_map(|n| {
            let link = (0..n, 0..n, class(), class());
            (
                Just(n),
                prop::collection::vec(link, 0..=MAX_EDGES + 2),
                prop::collection::vec(0..n, 1..=MAX_TARGETS),
            )
        })
        .prop_map(|(nodes, raw, targets)| {
            let mut links = Vec::new();
            let mut edges = 0;
            for (a, b, lc, rc) in raw {
                if nodes < 2 {
                    break;
                }
                let b = if a == b { (b + 1) % nodes } else { b };
                let l = LinkSpec {
                    left: a,
                    right: b,
                    left_class: lc,
                    right_class: rc,
                };
                if edges + edge_count(&l) > MAX_EDGES {
                    continue;
                }
                edges += edge_count(&l);
                links.push(l);
            }
            let targets = targets.into_iter().unique().collect();
            Case {
                nodes,
                links,
                targets,
            }
        })
}

pub fn table_name(i: usize) -> String {
    format!("t{i}")
}

pub fn link_name(k: usize) -> String {
    format!("L{k:02}")
}

/// Each link gets its own pair of columns so classes never conflict.
pub fn catalog(case: &Case) -> Catalog {
    catalog_in_order(
        case,
        &(0..case.nodes).collect::<Vec<_>>(),
        &(0..case.links.len()).collect::<Vec<_>>(),
    )
}

pub fn catalog_in_order(case: &Case, table_order: &[usize], link_order: &[usize]) -> Catalog {
    let mut c = Catalog::new();
    for &t in table_order {
        let mut cols: Vec<Column> = vec![Column::new("id", None)];
        for (k, l) in case.links.iter().enumerate() {
            if l.left == t {
                cols.push(Column::new(format!("l{k}"), Some(l.left_class)));
            }
            if l.right == t {
                cols.push(Column::new(format!("r{k}"), Some(l.right_class)));
            }
        }
        c = c.with_table(table_name(t), cols).unwrap();
    }
    for &k in link_order {
        let l = &case.links[k];
        let draft = LinkDraft::new(
            format!("{}.l{k}", table_name(l.left)).parse().unwrap(),
            format!("{}.r{k}", table_name(l.right)).parse().unwrap(),
        )
        .id(link_name(k).as_str());
        c = c.add_link(draft).unwrap();
    }
    c
}

pub fn target_names(case: &Case) -> Vec<String> {
    case.targets.iter().map(|&t| table_name(t)).collect()
}

/// (from table, to table, link id)
pub type Step = (usize, usize, usize);

pub fn reference_edges(case: &Case) -> Vec<Step> {
    let mut out = Vec::new();
    for (k, l) in case.links.iter().enumerate() {
        match (l.left_class, l.right_class) {
            (ColumnClass::Many, ColumnClass::One) => out.push((l.left, l.right, k)),
            (ColumnClass::One, ColumnClass::Many) => out.push((l.right, l.left, k)),
            (ColumnClass::One, ColumnClass::One) => {
                out.push((l.left, l.right, k));
                out.push((l.right, l.left, k));
            }
            (ColumnClass::Many, ColumnClass::Many) => {}
        }
    }
    out
}

fn nodes_of(origin: usize, path: &[Step]) -> BTreeSet<usize> {
    std::iter::once(origin)
        .chain(path.iter().map(|s| s.1))
        .collect()
}

fn is_strict_superset(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> bool {
    a.len() > b.len() && a.is_superset(b)
}

/// Every simple path from `s` to `d`: each ordering of every subset of the
/// other tables, expanded over parallel edges.
pub fn reference_simple_paths(case: &Case, edges: &[Step], s: usize, d: usize) -> Vec<Vec<Step>> {
    if s == d {
        return vec![vec![]];
    }
    let others: Vec<usize> = (0..case.nodes).filter(|&n| n != s && n != d).collect();
    let mut out = Vec::new();
    for k in 0..=others.len() {
        for middle in others.iter().copied().permutations(k) {
            let chain: Vec<usize> = std::iter::once(s)
                .chain(middle)
                .chain(std::iter::once(d))
                .collect();
            let hops: Vec<Vec<Step>> = chain
                .windows(2)
                .map(|w| {
                    edges
                        .iter()
                        .copied()
                        .filter(|e| e.0 == w[0] && e.1 == w[1])
                        .collect()
                })
                .collect();
            if hops.iter().any(Vec::is_empty) {
                continue;
            }
            out.extend(hops.into_iter().multi_cartesian_product());
        }
    }
    out
}

pub fn reference_reduce(origin: usize, mut paths: Vec<Vec<Step>>) -> Vec<Vec<Step>> {
    paths.sort_by_key(|p| nodes_of(origin, p).len());
    let sets: Vec<BTreeSet<usize>> = paths.iter().map(|p| nodes_of(origin, p)).collect();
    paths
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !(0..*i).any(|j| is_strict_superset(&sets[*i], &sets[j])))
        .map(|(_, p)| p)
        .collect()
}

/// Surviving (origin, steps) sequences.
pub fn reference_plan(case: &Case) -> BTreeSet<(usize, Vec<Step>)> {
    let edges = reference_edges(case);
    let mut h: Vec<(usize, Vec<Step>)> = Vec::new();
    for origin in 0..case.nodes {
        let v: Vec<Vec<Vec<Step>>> = case
            .targets
            .iter()
            .map(|&d| reference_reduce(origin, reference_simple_paths(case, &edges, origin, d)))
            .collect();
        if v.iter().any(Vec::is_empty) {
            continue;
        }
        for combination in v.into_iter().multi_cartesian_product() {
            let mut flat: Vec<Step> = Vec::new();
            for step in combination.into_iter().flatten() {
                if !flat.contains(&step) {
                    flat.push(step);
                }
            }
            h.push((origin, flat));
        }
    }
    h.sort_by_key(|(o, p)| nodes_of(*o, p).len());
    let sets: Vec<BTreeSet<usize>> = h.iter().map(|(o, p)| nodes_of(*o, p)).collect();
    h.into_iter()
        .enumerate()
        .filter(|(i, _)| !(0..*i).any(|j| is_strict_superset(&sets[*i], &sets[j])))
        .map(|(_, s)| s)
        .collect()
}

fn index_of(name: &str, prefix: char) -> usize {
    name.strip_prefix(prefix)
        .and_then(|n| n.parse().ok())
        .unwrap_or_else(|| panic!("unexpected name {name}"))
}

/// The engine's result in the reference representation.
pub fn engine_sequences(result: &PlanResult) -> Vec<(usize, Vec<Step>)> {
    result
        .sequences
        .iter()
        .map(|s| {
            let steps = s
                .steps
                .iter()
                .map(|st| {
                    (
                        index_of(st.from.table.as_str(), 't'),
                        index_of(st.to.table.as_str(), 't'),
                        index_of(st.link_id.as_str(), 'L'),
                    )
                })
                .collect();
            (index_of(s.origin.as_str(), 't'), steps)
        })
        .collect()
}

pub fn table_sets(seqs: impl IntoIterator<Item = (usize, Vec<Step>)>) -> BTreeSet<Vec<usize>> {
    seqs.into_iter()
        .map(|(o, p)| nodes_of(o, &p).into_iter().collect())
        .collect()
}

/// Checks one case; `Err` describes the first disagreement.
pub fn check_case(case: &Case) -> Result<(), String> {
    let catalog = catalog(case);
    let graph = denorm_core::JoinGraph::from_catalog(&catalog);
    let result = denorm_core::plan(
        &graph,
        &denorm_core::TargetSet::new(target_names(case)),
        &denorm_core::PlanOptions::default(),
        None,
    )
    .map_err(|e| format!("plan failed: {e}"))?;
    if !result.diagnostics.combination_cap_exceeded.is_empty() {
        return Err("combination cap exceeded".into());
    }
    let got = engine_sequences(&result);
    let expected = reference_plan(case);
    let got_set: BTreeSet<_> = got.iter().cloned().collect();
    if got_set.len() != got.len() {
        return Err(format!("duplicate sequences in {got:?}"));
    }
    if table_sets(got.clone()) != table_sets(expected.clone()) {
        return Err(format!(
            "table sets differ: engine {got:?}, reference {expected:?}"
        ));
    }
    if got_set != expected {
        return Err(format!(
            "sequences differ: engine {got:?}, reference {expected:?}"
        ));
    }
    Ok(())
}
