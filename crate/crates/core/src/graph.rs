//! Directed join multigraph built from a catalog's links.
//!
//! Connection rules, per link:
//! - many-to-one: one edge from the many side to the one side
//! - one-to-many: normalized to many-to-one by swapping endpoints
//! - one-to-one: an edge in each direction, both carrying the link id
//! - many-to-many: no edge

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnRef, LinkId, RelationshipKind, TableRef};
use crate::error::{Error, Result};

/// One traversable direction of a link.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub from: TableRef,
    pub to: TableRef,
    pub link_id: LinkId,
    pub from_column: Arc<str>,
    pub to_column: Arc<str>,
}

impl DirectedEdge {
    pub fn from_ref(&self) -> ColumnRef {
        ColumnRef {
            table: self.from.clone(),
            column: self.from_column.clone(),
        }
    }

    pub fn to_ref(&self) -> ColumnRef {
        ColumnRef {
            table: self.to.clone(),
            column: self.to_column.clone(),
        }
    }
}

/// Unordered pair of tables, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TablePair(TableRef, TableRef);

impl TablePair {
    pub fn new(a: TableRef, b: TableRef) -> Self {
        if a <= b {
            TablePair(a, b)
        } else {
            TablePair(b, a)
        }
    }
}

/// Per table-pair restriction of which links take part in the graph.
///
/// Pairs without an entry keep all their links. A pair mapped to an empty set
/// keeps none.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinkSelection {
    chosen: BTreeMap<TablePair, BTreeSet<LinkId>>,
}

impl LinkSelection {
    pub fn all() -> Self {
        Self::default()
    }

    /// Restricts `pair` to exactly `links`.
    pub fn choose(mut self, pair: TablePair, links: impl IntoIterator<Item = LinkId>) -> Self {
        self.chosen.insert(pair, links.into_iter().collect());
        self
    }

    /// Groups link ids by the table pair they connect; each touched pair is
    /// restricted to the listed ids.
    pub fn from_link_ids<I, S>(catalog: &Catalog, ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut chosen: BTreeMap<TablePair, BTreeSet<LinkId>> = BTreeMap::new();
        for id in ids {
            let id = id.as_ref();
            let link = catalog
                .link(id)
                .ok_or_else(|| Error::UnknownLinkSelected(id.to_owned()))?;
            chosen
                .entry(TablePair::new(
                    link.left.table.clone(),
                    link.right.table.clone(),
                ))
                .or_default()
                .insert(link.id.clone());
        }
        Ok(LinkSelection { chosen })
    }

    /// Excludes link `id`. An unrestricted pair becomes restricted to its
    /// other links. Returns whether the link was admitted before.
    pub fn deselect(&mut self, catalog: &Catalog, id: &str) -> Result<bool> {
        let link = catalog
            .link(id)
            .ok_or_else(|| Error::UnknownLinkSelected(id.to_owned()))?;
        let pair = TablePair::new(link.left.table.clone(), link.right.table.clone());
        let set = self.chosen.entry(pair.clone()).or_insert_with(|| {
            catalog
                .links()
                .iter()
                .filter(|l| TablePair::new(l.left.table.clone(), l.right.table.clone()) == pair)
                .map(|l| l.id.clone())
                .collect()
        });
        Ok(set.remove(id))
    }

    pub fn is_all(&self) -> bool {
        self.chosen.is_empty()
    }

    fn admits(&self, pair: &TablePair, id: &LinkId) -> bool {
        self.chosen.get(pair).is_none_or(|set| set.contains(id))
    }

    fn validate(&self, catalog: &Catalog) -> Result<()> {
        for (pair, ids) in &self.chosen {
            for id in ids {
                match catalog.link(id.as_str()) {
                    Some(l)
                        if TablePair::new(l.left.table.clone(), l.right.table.clone()) == *pair => {
                    }
                    _ => return Err(Error::UnknownLinkSelected(id.to_string())),
                }
            }
        }
        Ok(())
    }
}

/// Nodes are all catalog tables, isolated ones included. Edges are sorted by link id.
#[derive(Clone, Debug)]
pub struct JoinGraph {
    nodes: Vec<TableRef>,
    index: HashMap<TableRef, usize>,
    edges: Vec<DirectedEdge>,
    targets: Vec<usize>,
    outgoing: Vec<Vec<usize>>,
    fingerprint: u64,
}

impl JoinGraph {
    /// Graph over every link in the catalog.
    pub fn from_catalog(catalog: &Catalog) -> Self {
        build_graph(catalog, &LinkSelection::all()).expect("an empty selection is always valid")
    }

    pub fn nodes(&self) -> &[TableRef] {
        &self.nodes
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, table: &str) -> Option<usize> {
        self.index.get(table).copied()
    }

    pub(crate) fn require(&self, table: &str) -> Result<usize> {
        self.node_index(table)
            .ok_or_else(|| Error::UnknownTable(table.to_owned()))
    }

    pub fn contains(&self, table: &str) -> bool {
        self.index.contains_key(table)
    }

    /// Content hash of nodes and edges. Identical graphs built separately share it.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub(crate) fn outgoing(&self, node: usize) -> &[usize] {
        &self.outgoing[node]
    }

    pub(crate) fn edge_target(&self, edge: usize) -> usize {
        self.targets[edge]
    }

    /// Nodes reachable from `src`, `src` included.
    pub(crate) fn reachable_set(&self, src: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut queue = std::collections::VecDeque::from([src]);
        seen[src] = true;
        while let Some(n) = queue.pop_front() {
            for &e in &self.outgoing[n] {
                let t = self.targets[e];
                if !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
        seen
    }

    pub fn summary(&self) -> GraphSummary {
        let mut in_deg = vec![0usize; self.nodes.len()];
        for &t in &self.targets {
            in_deg[t] += 1;
        }
        GraphSummary {
            node_count: self.nodes.len(),
            edge_count: self.edges.len(),
            degrees: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, t)| NodeDegree {
                    table: t.clone(),
                    in_degree: in_deg[i],
                    out_degree: self.outgoing[i].len(),
                })
                .collect(),
        }
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| ExportEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                    link_id: e.link_id.clone(),
                })
                .collect(),
        }
    }

    /// Graphviz rendering, one edge per line labelled with its link id.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph join_graph {\n    rankdir=LR;\n");
        for n in &self.nodes {
            let _ = writeln!(out, "    {};", dot_quote(n.as_str()));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "    {} -> {} [label={}];",
                dot_quote(e.from.as_str()),
                dot_quote(e.to.as_str()),
                dot_quote(e.link_id.as_str())
            );
        }
        out.push_str("}\n");
        out
    }
}

fn dot_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub degrees: Vec<NodeDegree>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDegree {
    pub table: TableRef,
    pub in_degree: usize,
    pub out_degree: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<TableRef>,
    pub edges: Vec<ExportEdge>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub from: TableRef,
    pub to: TableRef,
    pub link_id: LinkId,
}

pub fn build_graph(catalog: &Catalog, selection: &LinkSelection) -> Result<JoinGraph> {
    selection.validate(catalog)?;

    let nodes: Vec<TableRef> = catalog.tables().iter().map(|t| t.name.clone()).collect();
    let index: HashMap<TableRef, usize> = nodes
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, t)| (t, i))
        .collect();

    let mut links: Vec<_> = catalog
        .links()
        .iter()
        .filter(|l| {
            selection.admits(
                &TablePair::new(l.left.table.clone(), l.right.table.clone()),
                &l.id,
            )
        })
        .collect();
    links.sort_by(|a, b| a.id.cmp(&b.id));

    let mut edges = Vec::new();
    for link in links {
        let forward = || DirectedEdge {
            from: link.left.table.clone(),
            to: link.right.table.clone(),
            link_id: link.id.clone(),
            from_column: link.left.column.clone(),
            to_column: link.right.column.clone(),
        };
        let backward = || DirectedEdge {
            from: link.right.table.clone(),
            to: link.left.table.clone(),
            link_id: link.id.clone(),
            from_column: link.right.column.clone(),
            to_column: link.left.column.clone(),
        };
        match link.kind {
            RelationshipKind::ManyToOne => edges.push(forward()),
            RelationshipKind::OneToMany => edges.push(backward()),
            RelationshipKind::OneToOne => {
                edges.push(forward());
                edges.push(backward());
            }
            RelationshipKind::ManyToMany => {}
        }
    }

    let mut outgoing = vec![Vec::new(); nodes.len()];
    let mut targets = Vec::with_capacity(edges.len());
    for (i, e) in edges.iter().enumerate() {
        outgoing[index[&e.from]].push(i);
        targets.push(index[&e.to]);
    }

    let mut hasher = DefaultHasher::new();
    nodes.hash(&mut hasher);
    edges.hash(&mut hasher);

    Ok(JoinGraph {
        nodes,
        index,
        edges,
        targets,
        outgoing,
        fingerprint: hasher.finish(),
    })
}

/// Dense bitset over node indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct NodeSet {
    words: Vec<u64>,
    len: usize,
}

impl NodeSet {
    pub(crate) fn with_capacity(nodes: usize) -> Self {
        NodeSet {
            words: vec![0; nodes.div_ceil(64)],
            len: 0,
        }
    }

    pub(crate) fn insert(&mut self, n: usize) -> bool {
        let (w, b) = (n / 64, 1u64 << (n % 64));
        let fresh = self.words[w] & b == 0;
        if fresh {
            self.words[w] |= b;
            self.len += 1;
        }
        fresh
    }

    pub(crate) fn is_strict_superset(&self, other: &NodeSet) -> bool {
        self.len > other.len
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & b == *b)
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64)
                .filter(move |b| bits & (1u64 << b) != 0)
                .map(move |b| w * 64 + b)
        })
    }
}
