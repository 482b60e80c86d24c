//! Join-sequence synthesis for a set of target tables.
//!
//! Every table of the graph is tried as the origin (left-most table). For an
//! origin that reaches all targets, the reduced path sets towards each target
//! are combined by cartesian product; each combination is flattened into one
//! list of join steps with repeated steps dropped. The collected sequences are
//! sorted by table count and any sequence whose table set strictly contains an
//! earlier one is discarded.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{ColumnRef, LinkId, TableRef};
use crate::error::{Error, Result};
use crate::graph::{DirectedEdge, JoinGraph, NodeSet};
use crate::pathfinder::{self, minimal_by_superset, Path, PathCache, PathSet, DEFAULT_MAX_DEPTH};

pub const DEFAULT_COMBINATION_CAP: usize = 10_000;

/// Ordered, duplicate-free list of tables the join must cover.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSet {
    tables: Vec<TableRef>,
}

impl TargetSet {
    pub fn new<I, T>(tables: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: Into<TableRef>,
    {
        let mut out: Vec<TableRef> = Vec::new();
        for t in tables {
            let t = t.into();
            if !out.contains(&t) {
                out.push(t);
            }
        }
        TargetSet { tables: out }
    }

    /// Tables of the given columns, in first-mention order.
    pub fn from_columns<'a>(columns: impl IntoIterator<Item = &'a ColumnRef>) -> Self {
        Self::new(columns.into_iter().map(|c| c.table.clone()))
    }

    pub fn tables(&self) -> &[TableRef] {
        &self.tables
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    /// Appends tables not yet present.
    pub fn extend<I, T>(&mut self, more: I)
    where
        I: IntoIterator<Item = T>,
        T: Into<TableRef>,
    {
        for t in more {
            let t = t.into();
            if !self.tables.contains(&t) {
                self.tables.push(t);
            }
        }
    }
}

/// One `JOIN to.table ON from = to` step.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JoinStep {
    pub from: ColumnRef,
    pub to: ColumnRef,
    pub link_id: LinkId,
}

impl From<&DirectedEdge> for JoinStep {
    fn from(e: &DirectedEdge) -> Self {
        JoinStep {
            from: e.from_ref(),
            to: e.to_ref(),
            link_id: e.link_id.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSequence {
    pub origin: TableRef,
    pub steps: Vec<JoinStep>,
    tables: BTreeSet<TableRef>,
}

impl JoinSequence {
    pub fn new(origin: TableRef, steps: Vec<JoinStep>) -> Self {
        let tables = std::iter::once(origin.clone())
            .chain(steps.iter().map(|s| s.to.table.clone()))
            .collect();
        JoinSequence {
            origin,
            steps,
            tables,
        }
    }

    pub fn from_edges<'a>(
        origin: TableRef,
        edges: impl IntoIterator<Item = &'a DirectedEdge>,
    ) -> Self {
        Self::new(origin, edges.into_iter().map(JoinStep::from).collect())
    }

    /// Every table the sequence touches, origin included.
    pub fn tables(&self) -> &BTreeSet<TableRef> {
        &self.tables
    }

    /// `(from table, to table)` per step.
    pub fn pairs(&self) -> Vec<(&str, &str)> {
        self.steps
            .iter()
            .map(|s| (s.from.table.as_str(), s.to.table.as_str()))
            .collect()
    }

    /// Steps grouped into arrow chains, e.g. `["a→b→c", "a→d"]`. A chain
    /// breaks whenever a step does not continue from the previous step's table.
    pub fn chains(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut last: Option<&TableRef> = None;
        for s in &self.steps {
            match (out.last_mut(), last) {
                (Some(chain), Some(prev)) if *prev == s.from.table => {
                    chain.push('→');
                    chain.push_str(s.to.table.as_str());
                }
                _ => out.push(format!("{}→{}", s.from.table, s.to.table)),
            }
            last = Some(&s.to.table);
        }
        if out.is_empty() {
            out.push(self.origin.to_string());
        }
        out
    }

    fn order_key(&self) -> (usize, &str, Vec<&str>) {
        (
            self.tables.len(),
            self.origin.as_str(),
            self.steps.iter().map(|s| s.link_id.as_str()).collect(),
        )
    }
}

impl fmt::Display for JoinSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, (a, b)) in self.pairs().into_iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "({a}, {b})")?;
        }
        f.write_str("]")
    }
}

#[derive(Clone, Debug)]
pub struct PlanOptions {
    pub max_depth: usize,
    /// Combinations examined per origin before giving up on that origin.
    pub combination_cap: usize,
    pub deadline: Option<Instant>,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            max_depth: DEFAULT_MAX_DEPTH,
            combination_cap: DEFAULT_COMBINATION_CAP,
            deadline: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub candidate_origins: usize,
    pub rejected_unreachable: Vec<TableRef>,
    /// Reachable, but no path within the depth bound.
    pub rejected_no_path: Vec<TableRef>,
    pub viable_origins: Vec<TableRef>,
    pub combinations: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub combination_cap_exceeded: Vec<TableRef>,
    pub depth_truncated: bool,
    pub timed_out: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanResult {
    pub sequences: Vec<JoinSequence>,
    pub diagnostics: PlanDiagnostics,
}

impl PlanResult {
    pub fn is_feasible(&self) -> bool {
        !self.sequences.is_empty()
    }

    /// Compact JSON shared by the CLI and the HTTP service.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plan serializes")
    }
}

struct Candidate {
    sequence: JoinSequence,
    nodes: NodeSet,
}

pub fn plan(
    graph: &JoinGraph,
    targets: &TargetSet,
    options: &PlanOptions,
    cache: Option<&PathCache>,
) -> Result<PlanResult> {
    let target_idx = resolve_targets(graph, targets)?;
    let mut diag = PlanDiagnostics::default();
    let mut found: Vec<Candidate> = Vec::new();
    let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let expired = || options.deadline.is_some_and(|t| Instant::now() >= t);

    'origins: for origin in 0..graph.node_count() {
        if expired() {
            diag.timed_out = true;
            break;
        }
        diag.candidate_origins += 1;
        let origin_ref = graph.nodes()[origin].clone();

        let reach = graph.reachable_set(origin);
        if target_idx.iter().any(|&t| !reach[t]) {
            diag.rejected_unreachable.push(origin_ref);
            continue;
        }

        let mut sets = Vec::with_capacity(target_idx.len());
        for &t in &target_idx {
            let got =
                pathfinder::lookup(graph, origin, t, options.max_depth, cache, options.deadline);
            if got.cache_hit {
                diag.cache_hits += 1;
            } else if cache.is_some() {
                diag.cache_misses += 1;
            }
            if got.timed_out {
                diag.timed_out = true;
                break 'origins;
            }
            diag.depth_truncated |= got.set.truncated;
            sets.push(got.set);
        }
        if sets.iter().any(|s| s.is_empty()) {
            diag.rejected_no_path.push(origin_ref);
            continue;
        }
        diag.viable_origins.push(origin_ref.clone());

        let mut odometer = vec![0usize; sets.len()];
        let mut examined = 0usize;
        loop {
            if examined == options.combination_cap {
                diag.combination_cap_exceeded.push(origin_ref);
                break;
            }
            examined += 1;
            diag.combinations += 1;
            if examined.is_multiple_of(1024) && expired() {
                diag.timed_out = true;
                break 'origins;
            }

            let (edges, nodes) = flatten_indices(graph, origin, &sets, &odometer);
            if seen.insert((origin, edges.clone())) {
                found.push(Candidate {
                    sequence: JoinSequence::from_edges(
                        origin_ref.clone(),
                        edges.iter().map(|&e| &graph.edges()[e]),
                    ),
                    nodes,
                });
            }
            if !advance(&mut odometer, &sets) {
                break;
            }
        }
    }

    let kept = minimal_by_superset(
        found,
        |c| {
            let (n, o, ids) = c.sequence.order_key();
            (
                n,
                o.to_owned(),
                ids.into_iter().map(str::to_owned).collect::<Vec<_>>(),
            )
        },
        |big, small| big.nodes.is_strict_superset(&small.nodes),
    );
    Ok(PlanResult {
        sequences: kept.into_iter().map(|c| c.sequence).collect(),
        diagnostics: diag,
    })
}

/// True iff some origin reaches every target.
pub fn joinable(graph: &JoinGraph, targets: &TargetSet) -> Result<bool> {
    let target_idx = resolve_targets(graph, targets)?;
    Ok((0..graph.node_count()).any(|o| {
        let reach = graph.reachable_set(o);
        target_idx.iter().all(|&t| reach[t])
    }))
}

/// Concatenates the paths' steps in order, keeping the first occurrence of each step.
pub fn flatten_combination(combination: &[Path]) -> Result<Vec<DirectedEdge>> {
    let Some(first) = combination.first() else {
        return Ok(Vec::new());
    };
    let mut out: Vec<DirectedEdge> = Vec::new();
    for p in combination {
        if p.origin != first.origin {
            return Err(Error::MixedOrigins {
                expected: first.origin.to_string(),
                found: p.origin.to_string(),
            });
        }
        for e in &p.steps {
            if !out.contains(e) {
                out.push(e.clone());
            }
        }
    }
    Ok(out)
}

/// Sorts by table count (ties: origin name, then link-id sequence) and drops
/// sequences whose table set strictly contains that of an earlier one.
pub fn superset_filter(sequences: Vec<JoinSequence>) -> Vec<JoinSequence> {
    minimal_by_superset(
        sequences,
        |s| {
            let (n, o, ids) = s.order_key();
            (
                n,
                o.to_owned(),
                ids.into_iter().map(str::to_owned).collect::<Vec<_>>(),
            )
        },
        |big, small| big.tables.len() > small.tables.len() && big.tables.is_superset(&small.tables),
    )
}

fn resolve_targets(graph: &JoinGraph, targets: &TargetSet) -> Result<Vec<usize>> {
    if targets.is_empty() {
        return Err(Error::EmptyTargets);
    }
    targets
        .tables()
        .iter()
        .map(|t| graph.require(t.as_str()))
        .collect()
}

fn flatten_indices(
    graph: &JoinGraph,
    origin: usize,
    sets: &[std::sync::Arc<PathSet>],
    pick: &[usize],
) -> (Vec<usize>, NodeSet) {
    let mut edges: Vec<usize> = Vec::new();
    let mut nodes = NodeSet::with_capacity(graph.node_count());
    nodes.insert(origin);
    for (set, &i) in sets.iter().zip(pick) {
        for &e in &set.edge_ids[i] {
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        for n in set.node_sets[i].iter() {
            nodes.insert(n);
        }
    }
    (edges, nodes)
}

/// Steps a mixed-radix counter; returns false once it wraps.
fn advance(odometer: &mut [usize], sets: &[std::sync::Arc<PathSet>]) -> bool {
    for (digit, set) in odometer.iter_mut().zip(sets).rev() {
        *digit += 1;
        if *digit < set.len() {
            return true;
        }
        *digit = 0;
    }
    false
}
