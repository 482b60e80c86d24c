//! On-the-fly denormalization: a schema is represented as a directed join
//! graph built from foreign-key links, and for any set of requested tables
//! the engine synthesizes every minimal join sequence and the SQL for it.
//!
//! ```
//! use denorm_core::{Catalog, ColumnClass, LinkDraft, TargetSet, PlanOptions, plan};
//!
//! let catalog = Catalog::new()
//!     .with_table("orders", [("orderID", ColumnClass::One), ("customerID", ColumnClass::Many)])?
//!     .with_table("customers", [("customerID", ColumnClass::One)])?
//!     .add_link(LinkDraft::new("orders.customerID".parse()?, "customers.customerID".parse()?))?;
//! let graph = denorm_core::JoinGraph::from_catalog(&catalog);
//! let result = plan(&graph, &TargetSet::new(["customers", "orders"]), &PlanOptions::default(), None)?;
//! assert_eq!(result.sequences.len(), 1);
//! assert_eq!(result.sequences[0].origin.as_str(), "orders");
//! # Ok::<(), denorm_core::Error>(())
//! ```

pub mod aliases;
pub mod catalog;
pub mod data;
pub mod error;
pub mod graph;
pub mod inference;
pub mod metadata;
pub mod pathfinder;
pub mod planner;
pub mod sql;
pub mod value;
pub mod workspace;

pub use aliases::TableAliases;
pub use catalog::{
    classify_relationship, Catalog, Column, ColumnClass, ColumnRef, Link, LinkDraft, LinkId,
    RelationshipKind, Table, TableRef,
};
pub use data::{ColumnType, Dataset, DatasetTable, IngestOptions, RowSet, SqliteIntrospector};
pub use error::{Error, Result};
pub use graph::{build_graph, DirectedEdge, GraphExport, GraphSummary, JoinGraph, LinkSelection};
pub use inference::{
    catalog_from_schema, import_declared_fks, infer_column_class, infer_links_by_name, FkImport,
    SchemaIntrospector, UniquenessReport,
};
pub use metadata::{load_catalog, load_catalog_file, save_catalog, save_catalog_file};
pub use pathfinder::{
    all_simple_paths, paths_between, reachable, reduce_paths, Path, PathCache, PathSet,
    DEFAULT_MAX_DEPTH,
};
pub use planner::{
    flatten_combination, joinable, plan, superset_filter, JoinSequence, JoinStep, PlanDiagnostics,
    PlanOptions, PlanResult, TargetSet, DEFAULT_COMBINATION_CAP,
};
pub use sql::{
    emit_count_sql, emit_sql, CompareOp, Dialect, Filter, JoinType, QuerySpec, QueryTemplate,
    Resolution, ResolutionPolicy, Resolver, RowCounter, SqlQuery,
};
pub use value::Value;
pub use workspace::{QueryOutcome, QueryRequest, QueryResult, Workspace, WorkspacePaths};
