//! Catalog, aliases, optional dataset and the derived graph, bundled for the
//! CLI and the HTTP service.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::aliases::TableAliases;
use crate::catalog::{Catalog, ColumnRef, TableRef};
use crate::data::{Dataset, RowSet};
use crate::error::{Error, Result};
use crate::graph::{build_graph, JoinGraph, LinkSelection};
use crate::metadata::load_catalog_file;
use crate::pathfinder::{PathCache, DEFAULT_MAX_DEPTH};
use crate::planner::{
    plan, JoinSequence, PlanOptions, PlanResult, TargetSet, DEFAULT_COMBINATION_CAP,
};
use crate::sql::{Dialect, Filter, JoinType, QueryTemplate, ResolutionPolicy, Resolver};

pub const METADATA_FILE: &str = "links.json";
pub const ALIASES_FILE: &str = "aliases.json";

#[derive(Clone, Debug, Default)]
pub struct WorkspacePaths {
    pub data_dir: Option<PathBuf>,
    /// Defaults to `links.json` inside the data directory.
    pub metadata: Option<PathBuf>,
    /// Defaults to `aliases.json` inside the data directory, if present.
    pub aliases: Option<PathBuf>,
}

impl WorkspacePaths {
    pub fn data_dir(dir: impl Into<PathBuf>) -> Self {
        WorkspacePaths {
            data_dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn metadata_path(&self) -> Option<PathBuf> {
        self.metadata
            .clone()
            .or_else(|| self.data_dir.as_ref().map(|d| d.join(METADATA_FILE)))
    }

    fn aliases_path(&self) -> Option<PathBuf> {
        self.aliases.clone().or_else(|| {
            self.data_dir
                .as_ref()
                .map(|d| d.join(ALIASES_FILE))
                .filter(|p| p.is_file())
        })
    }
}

#[derive(Debug)]
pub struct Workspace {
    catalog: Catalog,
    aliases: TableAliases,
    dataset: Option<Dataset>,
    graph: JoinGraph,
    cache: PathCache,
    pub max_depth: usize,
    pub combination_cap: usize,
    pub dialect: Dialect,
}

impl Workspace {
    pub fn new(catalog: Catalog, aliases: TableAliases, dataset: Option<Dataset>) -> Self {
        let graph = JoinGraph::from_catalog(&catalog);
        Workspace {
            catalog,
            aliases,
            dataset,
            graph,
            cache: PathCache::new(),
            max_depth: DEFAULT_MAX_DEPTH,
            combination_cap: DEFAULT_COMBINATION_CAP,
            dialect: Dialect::default(),
        }
    }

    /// Loads the metadata file and aliases; ingests the data directory if given.
    /// Without a metadata file the catalog is the classified ingestion skeleton.
    pub fn open(paths: &WorkspacePaths) -> Result<Self> {
        let dataset = match &paths.data_dir {
            Some(dir) => Some(Dataset::ingest_csv_dir(dir)?),
            None => None,
        };
        let catalog = match paths.metadata_path() {
            Some(p) if p.is_file() || paths.metadata.is_some() => load_catalog_file(&p)?,
            _ => match &dataset {
                Some((ds, skeleton)) => ds.classify(skeleton)?.0,
                None => Catalog::new(),
            },
        };
        let aliases = match paths.aliases_path() {
            Some(p) => TableAliases::load(p)?,
            None => TableAliases::new(),
        };
        Ok(Self::new(catalog, aliases, dataset.map(|(ds, _)| ds)))
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn aliases(&self) -> &TableAliases {
        &self.aliases
    }

    pub fn dataset(&self) -> Option<&Dataset> {
        self.dataset.as_ref()
    }

    pub fn graph(&self) -> &JoinGraph {
        &self.graph
    }

    pub fn cache(&self) -> &PathCache {
        &self.cache
    }

    /// The graph restricted to the given link ids; all links when `None`.
    pub fn graph_for(&self, link_ids: Option<&[String]>) -> Result<JoinGraph> {
        match link_ids {
            None => Ok(self.graph.clone()),
            Some(ids) => build_graph(
                &self.catalog,
                &LinkSelection::from_link_ids(&self.catalog, ids)?,
            ),
        }
    }

    pub fn table(&self, name: &str) -> TableRef {
        self.aliases.table(&self.catalog, name)
    }

    pub fn column(&self, column: &ColumnRef) -> ColumnRef {
        self.aliases.column(&self.catalog, column)
    }

    pub fn targets<S: AsRef<str>>(&self, names: &[S]) -> TargetSet {
        TargetSet::new(names.iter().map(|n| self.table(n.as_ref())))
    }

    pub fn plan_options(&self, max_depth: Option<usize>, deadline: Option<Instant>) -> PlanOptions {
        PlanOptions {
            max_depth: max_depth.unwrap_or(self.max_depth),
            combination_cap: self.combination_cap,
            deadline,
        }
    }

    pub fn plan<S: AsRef<str>>(
        &self,
        names: &[S],
        max_depth: Option<usize>,
        deadline: Option<Instant>,
    ) -> Result<PlanResult> {
        plan(
            &self.graph,
            &self.targets(names),
            &self.plan_options(max_depth, deadline),
            Some(&self.cache),
        )
    }

    /// Plans for the request's tables, resolves the surviving sequences and
    /// executes the resulting SQL.
    pub fn query(&self, request: &QueryRequest, deadline: Option<Instant>) -> Result<QueryOutcome> {
        let dataset = self
            .dataset
            .as_ref()
            .ok_or_else(|| Error::BackendUnavailable("no data directory loaded".into()))?;
        let request = self.normalize(request);
        let columns = request
            .select
            .iter()
            .chain(request.filters.iter().map(|f| &f.column));
        for c in columns {
            if !self.catalog.contains_table(c.table.as_str()) {
                return Err(Error::UnknownTable(c.table.to_string()));
            }
            if !c.is_wildcard() && self.catalog.column(c).is_none() {
                return Err(Error::UnknownColumn(c.to_string()));
            }
        }
        let mut targets = TargetSet::new(request.targets.iter().map(TableRef::new));
        targets.extend(request.select.iter().map(|c| c.table.clone()));
        targets.extend(request.filters.iter().map(|f| f.column.table.clone()));

        let planned = plan(
            &self.graph,
            &targets,
            &self.plan_options(request.max_depth, deadline),
            Some(&self.cache),
        )?;
        if planned.diagnostics.timed_out {
            return Err(Error::Timeout);
        }
        if !planned.is_feasible() {
            let names: Vec<&str> = targets.tables().iter().map(TableRef::as_str).collect();
            return Err(Error::NoJoinPath(names.join(", ")));
        }

        let template = QueryTemplate {
            select: request.select.clone(),
            filters: request.filters.clone(),
            join_type: request.join_type,
        };
        let resolver = Resolver {
            catalog: &self.catalog,
            dialect: self.dialect,
            executor: Some(dataset),
        };
        let resolution = resolver.resolve(&planned.sequences, request.policy, &template)?;
        let queries = resolution.queries(&self.dialect)?;
        let mut results = Vec::with_capacity(queries.len());
        for q in &queries {
            let mut rows = dataset.query(q)?;
            let total_rows = rows.rows.len() as u64;
            if let Some(limit) = request.limit {
                rows.rows.truncate(limit);
            }
            results.push(QueryResult {
                sql: q.text.clone(),
                params: q.params.clone(),
                total_rows,
                rows,
            });
        }
        Ok(QueryOutcome {
            policy: resolution.policy,
            sequences: resolution
                .specs
                .iter()
                .map(|s| s.sequence.clone())
                .collect(),
            chosen: resolution.chosen,
            candidates: planned.sequences.len(),
            row_counts: resolution.row_counts,
            results,
        })
    }

    fn normalize(&self, request: &QueryRequest) -> QueryRequest {
        QueryRequest {
            targets: request
                .targets
                .iter()
                .map(|t| self.table(t).to_string())
                .collect(),
            select: request.select.iter().map(|c| self.column(c)).collect(),
            filters: request
                .filters
                .iter()
                .map(|f| Filter {
                    column: self.column(&f.column),
                    ..f.clone()
                })
                .collect(),
            ..request.clone()
        }
    }
}

/// Body of a query request. Targets are implied by selected and filtered
/// columns; `targets` adds tables that contribute no columns.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryRequest {
    pub targets: Vec<String>,
    pub select: Vec<ColumnRef>,
    pub filters: Vec<Filter>,
    pub policy: ResolutionPolicy,
    pub join_type: JoinType,
    pub max_depth: Option<usize>,
    /// Rows returned per result; the full count is still reported.
    pub limit: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryResult {
    pub sql: String,
    pub params: Vec<crate::value::Value>,
    pub total_rows: u64,
    #[serde(flatten)]
    pub rows: RowSet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QueryOutcome {
    pub policy: ResolutionPolicy,
    /// Sequences whose rows are returned.
    pub sequences: Vec<JoinSequence>,
    /// Indices of those sequences among the planner's candidates.
    pub chosen: Vec<usize>,
    pub candidates: usize,
    /// Per-candidate row counts, set by the most-rows policy.
    pub row_counts: Option<Vec<u64>>,
    pub results: Vec<QueryResult>,
}
