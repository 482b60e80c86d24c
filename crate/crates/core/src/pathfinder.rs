//! Reachability, bounded simple-path enumeration and superset reduction.
//!
//! Reduction sorts paths by node count, ties broken by link-id sequence, then
//! drops every path whose node set strictly contains the node set of an
//! earlier path. Paths with equal node sets are all kept.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::catalog::{LinkId, TableRef};
use crate::error::{Error, Result};
use crate::graph::{DirectedEdge, JoinGraph, NodeSet};

pub const DEFAULT_MAX_DEPTH: usize = 10;

/// A simple directed path. An empty `steps` list is the zero-length path at `origin`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub origin: TableRef,
    pub steps: Vec<DirectedEdge>,
}

impl Path {
    pub fn empty(origin: TableRef) -> Self {
        Path {
            origin,
            steps: Vec::new(),
        }
    }

    /// Builds a path from chained edges. Panics if `steps` is empty or does not chain.
    pub fn from_steps(steps: Vec<DirectedEdge>) -> Self {
        let origin = steps.first().expect("non-empty steps").from.clone();
        for pair in steps.windows(2) {
            assert_eq!(pair[0].to, pair[1].from, "steps must chain");
        }
        Path { origin, steps }
    }

    pub fn destination(&self) -> &TableRef {
        self.steps.last().map_or(&self.origin, |e| &e.to)
    }

    pub fn node_count(&self) -> usize {
        self.steps.len() + 1
    }

    pub fn tables(&self) -> BTreeSet<TableRef> {
        std::iter::once(self.origin.clone())
            .chain(self.steps.iter().map(|e| e.to.clone()))
            .collect()
    }

    pub fn link_ids(&self) -> impl Iterator<Item = &LinkId> {
        self.steps.iter().map(|e| &e.link_id)
    }

    /// `A→B→C` notation.
    pub fn chain(&self) -> String {
        let mut s = self.origin.to_string();
        for e in &self.steps {
            s.push('→');
            s.push_str(e.to.as_str());
        }
        s
    }
}

/// Reduced simple paths between two tables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSet {
    pub src: TableRef,
    pub dst: TableRef,
    pub paths: Vec<Path>,
    /// Search stopped at the depth bound somewhere, so longer paths may exist.
    pub truncated: bool,
    #[serde(skip)]
    pub(crate) edge_ids: Vec<Vec<usize>>,
    #[serde(skip)]
    pub(crate) node_sets: Vec<NodeSet>,
}

impl PathSet {
    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }
}

/// Output of [`all_simple_paths`], sorted by length then link-id sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimplePaths {
    pub paths: Vec<Path>,
    pub truncated: bool,
}

/// True iff a directed path leads from `src` to `dst`. Every table reaches itself.
pub fn reachable(graph: &JoinGraph, src: &str, dst: &str) -> Result<bool> {
    let s = graph.require(src)?;
    let d = graph.require(dst)?;
    Ok(s == d || graph.reachable_set(s)[d])
}

/// Every simple path from `src` to `dst` with at most `max_depth` edges.
pub fn all_simple_paths(
    graph: &JoinGraph,
    src: &str,
    dst: &str,
    max_depth: usize,
) -> Result<SimplePaths> {
    let s = graph.require(src)?;
    let d = graph.require(dst)?;
    let found = enumerate(graph, s, d, max_depth, None);
    let mut paths: Vec<_> = found
        .paths
        .iter()
        .map(|ids| materialize(graph, s, ids))
        .collect();
    paths.sort_by_key(path_key);
    Ok(SimplePaths {
        paths,
        truncated: found.truncated,
    })
}

/// Sorts and superset-filters paths that all run from `src` to `dst`.
pub fn reduce_paths(src: &TableRef, dst: &TableRef, paths: Vec<Path>) -> Result<PathSet> {
    for p in &paths {
        if &p.origin != src || p.destination() != dst {
            return Err(Error::MixedEndpoints {
                expected: format!("{src}→{dst}"),
                found: format!("{}→{}", p.origin, p.destination()),
            });
        }
    }
    let keyed: Vec<_> = paths.into_iter().map(|p| (p.tables(), p)).collect();
    let kept = minimal_by_superset(
        keyed,
        |(_, p)| path_key(p),
        |(big, _), (small, _)| big.len() > small.len() && big.is_superset(small),
    );
    Ok(PathSet {
        src: src.clone(),
        dst: dst.clone(),
        paths: kept.into_iter().map(|(_, p)| p).collect(),
        truncated: false,
        edge_ids: Vec::new(),
        node_sets: Vec::new(),
    })
}

/// Reduced paths from `src` to `dst`, consulting and filling `cache`.
///
/// Enumeration is skipped entirely when `dst` is unreachable.
pub fn paths_between(
    graph: &JoinGraph,
    src: &str,
    dst: &str,
    max_depth: usize,
    cache: Option<&PathCache>,
) -> Result<Arc<PathSet>> {
    let s = graph.require(src)?;
    let d = graph.require(dst)?;
    Ok(lookup(graph, s, d, max_depth, cache, None).set)
}

pub(crate) struct Lookup {
    pub set: Arc<PathSet>,
    pub cache_hit: bool,
    pub timed_out: bool,
}

pub(crate) fn lookup(
    graph: &JoinGraph,
    s: usize,
    d: usize,
    max_depth: usize,
    cache: Option<&PathCache>,
    deadline: Option<Instant>,
) -> Lookup {
    let key = CacheKey {
        graph: graph.fingerprint(),
        src: graph.nodes()[s].clone(),
        dst: graph.nodes()[d].clone(),
        max_depth,
    };
    if let Some(set) = cache.and_then(|c| c.get(&key)) {
        return Lookup {
            set,
            cache_hit: true,
            timed_out: false,
        };
    }

    let found = if s == d {
        Enumeration {
            paths: vec![Vec::new()],
            truncated: false,
            timed_out: false,
        }
    } else if !graph.reachable_set(s)[d] {
        Enumeration::default()
    } else {
        enumerate(graph, s, d, max_depth, deadline)
    };

    let mut keyed: Vec<_> = found
        .paths
        .into_iter()
        .map(|ids| {
            let nodes = node_set(graph, s, &ids);
            let path = materialize(graph, s, &ids);
            (path, ids, nodes)
        })
        .collect();
    keyed = minimal_by_superset(
        keyed,
        |(p, _, _)| path_key(p),
        |(_, _, big), (_, _, small)| big.is_strict_superset(small),
    );

    let mut set = PathSet {
        src: key.src.clone(),
        dst: key.dst.clone(),
        paths: Vec::with_capacity(keyed.len()),
        truncated: found.truncated,
        edge_ids: Vec::with_capacity(keyed.len()),
        node_sets: Vec::with_capacity(keyed.len()),
    };
    for (p, ids, nodes) in keyed {
        set.paths.push(p);
        set.edge_ids.push(ids);
        set.node_sets.push(nodes);
    }
    let set = Arc::new(set);
    if let (Some(c), false) = (cache, found.timed_out) {
        c.insert(key, set.clone());
    }
    Lookup {
        set,
        cache_hit: false,
        timed_out: found.timed_out,
    }
}

fn path_key(p: &Path) -> (usize, Vec<LinkId>) {
    (p.node_count(), p.link_ids().cloned().collect())
}

/// Stable-sorts by `key` (whose first component must be the set size) and keeps
/// each item that is not a strict superset of an already-kept item.
pub(crate) fn minimal_by_superset<T, K: Ord>(
    mut items: Vec<T>,
    key: impl Fn(&T) -> K,
    is_strict_superset: impl Fn(&T, &T) -> bool,
) -> Vec<T> {
    items.sort_by_cached_key(|t| key(t));
    let mut kept: Vec<T> = Vec::with_capacity(items.len());
    for item in items {
        if !kept.iter().any(|k| is_strict_superset(&item, k)) {
            kept.push(item);
        }
    }
    kept
}

fn materialize(graph: &JoinGraph, s: usize, ids: &[usize]) -> Path {
    Path {
        origin: graph.nodes()[s].clone(),
        steps: ids.iter().map(|&e| graph.edges()[e].clone()).collect(),
    }
}

fn node_set(graph: &JoinGraph, s: usize, ids: &[usize]) -> NodeSet {
    let mut set = NodeSet::with_capacity(graph.node_count());
    set.insert(s);
    for &e in ids {
        set.insert(graph.edge_target(e));
    }
    set
}

#[derive(Default)]
struct Enumeration {
    paths: Vec<Vec<usize>>,
    truncated: bool,
    timed_out: bool,
}

const DEADLINE_CHECK_INTERVAL: u32 = 4096;

/// Iterative DFS over outgoing edges; a path ends the first time it reaches `dst`.
fn enumerate(
    graph: &JoinGraph,
    s: usize,
    d: usize,
    max_depth: usize,
    deadline: Option<Instant>,
) -> Enumeration {
    let mut out = Enumeration::default();
    if s == d {
        out.paths.push(Vec::new());
        return out;
    }
    if max_depth == 0 {
        out.truncated = !graph.outgoing(s).is_empty();
        return out;
    }

    let mut visited = vec![false; graph.node_count()];
    visited[s] = true;
    let mut stack: Vec<(usize, usize)> = vec![(s, 0)];
    let mut edges: Vec<usize> = Vec::new();
    let mut ticks = 0u32;

    while let Some((node, cursor)) = stack.last_mut() {
        ticks += 1;
        if ticks == DEADLINE_CHECK_INTERVAL {
            ticks = 0;
            if deadline.is_some_and(|t| Instant::now() >= t) {
                out.timed_out = true;
                return out;
            }
        }
        let outgoing = graph.outgoing(*node);
        if *cursor == outgoing.len() {
            visited[*node] = false;
            stack.pop();
            edges.pop();
            continue;
        }
        let e = outgoing[*cursor];
        *cursor += 1;
        let t = graph.edge_target(e);
        if visited[t] {
            continue;
        }
        if t == d {
            let mut p = edges.clone();
            p.push(e);
            out.paths.push(p);
        } else if edges.len() + 1 < max_depth {
            visited[t] = true;
            edges.push(e);
            stack.push((t, 0));
        } else {
            out.truncated = true;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CacheKey {
    graph: u64,
    src: TableRef,
    dst: TableRef,
    max_depth: usize,
}

/// Memoized path sets keyed by graph fingerprint, endpoints and depth bound.
///
/// Safe to share between threads. Concurrent misses on the same key may both
/// compute; the later insert wins with an identical value.
#[derive(Debug, Default)]
pub struct PathCache {
    entries: RwLock<HashMap<CacheKey, Arc<PathSet>>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl PathCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn clear(&self) {
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .clear();
    }

    fn get(&self, key: &CacheKey) -> Option<Arc<PathSet>> {
        let got = self
            .entries
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(key)
            .cloned();
        let counter = if got.is_some() {
            &self.hits
        } else {
            &self.misses
        };
        counter.fetch_add(1, Ordering::Relaxed);
        got
    }

    fn insert(&self, key: CacheKey, set: Arc<PathSet>) {
        self.entries
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, set);
    }
}
