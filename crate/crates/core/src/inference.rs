//! Link discovery: value-uniqueness classification, shared-column-name
//! proposals and import of foreign keys declared in a backend.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::catalog::{
    classify_relationship, fresh_id, Catalog, Column, ColumnClass, ColumnRef, Link, LinkDraft,
    RelationshipKind, TableRef,
};
use crate::error::{Error, Result};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub column: ColumnRef,
    pub total_rows: u64,
    pub distinct_non_null: u64,
    pub null_count: u64,
    pub inferred_class: ColumnClass,
}

/// `One` iff no non-null value repeats. Nulls never count as duplicates.
pub fn infer_column_class(column: ColumnRef, values: &[Value]) -> UniquenessReport {
    let mut seen = HashSet::with_capacity(values.len());
    let mut nulls = 0u64;
    let mut repeated = false;
    for v in values {
        match v.identity() {
            None => nulls += 1,
            Some(k) => repeated |= !seen.insert(k),
        }
    }
    UniquenessReport {
        column,
        total_rows: values.len() as u64,
        distinct_non_null: seen.len() as u64,
        null_count: nulls,
        inferred_class: if repeated {
            ColumnClass::Many
        } else {
            ColumnClass::One
        },
    }
}

/// Proposes one link per (table pair, shared column name).
///
/// Many-to-many proposals are included; their `kind` marks them as not
/// connectable. Ids are fresh with respect to `catalog`. Nothing is added to
/// the catalog.
pub fn infer_links_by_name(
    catalog: &Catalog,
    class_of: impl Fn(&ColumnRef) -> Option<ColumnClass>,
) -> Result<Vec<Link>> {
    let mut names: Vec<&str> = Vec::new();
    for t in catalog.tables() {
        for c in &t.columns {
            if !names.contains(&&*c.name) {
                names.push(&c.name);
            }
        }
    }

    let mut proposed: Vec<Link> = Vec::new();
    for name in names {
        let holders: Vec<ColumnRef> = catalog
            .tables()
            .iter()
            .filter(|t| t.column(name).is_some())
            .map(|t| ColumnRef::new(t.name.clone(), name))
            .collect();
        for (i, a) in holders.iter().enumerate() {
            for b in &holders[i + 1..] {
                let ca = class_of(a).ok_or_else(|| Error::UnknownClass(a.to_string()))?;
                let cb = class_of(b).ok_or_else(|| Error::UnknownClass(b.to_string()))?;
                // Written many-side first so the link reads as many-to-one.
                let (left, right, lc, rc) = match classify_relationship(ca, cb) {
                    RelationshipKind::OneToMany => (b, a, cb, ca),
                    _ => (a, b, ca, cb),
                };
                let id = fresh_id(&format!("{}__{}", left.table, right.table), |id| {
                    catalog.link(id).is_some() || proposed.iter().any(|l| l.id.as_str() == id)
                });
                proposed.push(Link {
                    id,
                    left: left.clone(),
                    right: right.clone(),
                    left_class: lc,
                    right_class: rc,
                    kind: classify_relationship(lc, rc),
                    mandatory: false,
                });
            }
        }
    }
    Ok(proposed)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntrospectedColumn {
    pub name: String,
    /// Single-column primary key or single-column unique index.
    pub unique: bool,
    pub not_null: bool,
    pub primary_key: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeclaredForeignKey {
    pub table: String,
    pub columns: Vec<String>,
    pub referenced_table: String,
    /// `None` entries refer to the referenced table's primary key.
    pub referenced_columns: Vec<Option<String>>,
}

/// Narrow read-only view of a backend's schema.
pub trait SchemaIntrospector {
    fn list_tables(&self) -> Result<Vec<String>>;
    fn list_columns(&self, table: &str) -> Result<Vec<IntrospectedColumn>>;
    fn list_foreign_keys(&self, table: &str) -> Result<Vec<DeclaredForeignKey>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkipReason {
    CompositeKeySkipped,
    SelfReferencing,
    UnresolvedColumn,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedForeignKey {
    pub table: String,
    pub columns: Vec<String>,
    pub referenced_table: String,
    pub reason: SkipReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FkImport {
    pub links: Vec<Link>,
    /// Warning-level: keys that could not be represented as single-column links.
    pub skipped: Vec<SkippedForeignKey>,
}

/// One link per declared single-column foreign key, referencing side on the left.
///
/// A column is `One` when the backend guarantees uniqueness for it alone. A
/// link is mandatory when the referencing column is `NOT NULL`.
pub fn import_declared_fks(backend: &dyn SchemaIntrospector) -> Result<FkImport> {
    let mut out = FkImport::default();
    for table in backend.list_tables()? {
        let columns = backend.list_columns(&table)?;
        for fk in backend.list_foreign_keys(&table)? {
            let skip = |reason| SkippedForeignKey {
                table: fk.table.clone(),
                columns: fk.columns.clone(),
                referenced_table: fk.referenced_table.clone(),
                reason,
            };
            if fk.columns.len() != 1 {
                out.skipped.push(skip(SkipReason::CompositeKeySkipped));
                continue;
            }
            if fk.table == fk.referenced_table {
                out.skipped.push(skip(SkipReason::SelfReferencing));
                continue;
            }
            let parent_columns = backend.list_columns(&fk.referenced_table)?;
            let parent = match &fk.referenced_columns[0] {
                Some(name) => parent_columns.iter().find(|c| &c.name == name),
                None => {
                    let mut pk = parent_columns.iter().filter(|c| c.primary_key);
                    match (pk.next(), pk.next()) {
                        (Some(c), None) => Some(c),
                        _ => None,
                    }
                }
            };
            let child = columns.iter().find(|c| c.name == fk.columns[0]);
            let (Some(child), Some(parent)) = (child, parent) else {
                out.skipped.push(skip(SkipReason::UnresolvedColumn));
                continue;
            };

            let class = |c: &IntrospectedColumn| {
                if c.unique {
                    ColumnClass::One
                } else {
                    ColumnClass::Many
                }
            };
            let (lc, rc) = (class(child), class(parent));
            let id = fresh_id(&format!("{}__{}", fk.table, fk.referenced_table), |id| {
                out.links.iter().any(|l| l.id.as_str() == id)
            });
            out.links.push(Link {
                id,
                left: ColumnRef::new(TableRef::new(&fk.table), &child.name),
                right: ColumnRef::new(TableRef::new(&fk.referenced_table), &parent.name),
                left_class: lc,
                right_class: rc,
                kind: classify_relationship(lc, rc),
                mandatory: child.not_null,
            });
        }
    }
    Ok(out)
}

/// Tables and columns as the backend lists them, plus the importable
/// declared keys as links. Only link endpoint columns are classified.
pub fn catalog_from_schema(
    backend: &dyn SchemaIntrospector,
) -> Result<(Catalog, Vec<SkippedForeignKey>)> {
    let imported = import_declared_fks(backend)?;
    let mut catalog = Catalog::new();
    for table in backend.list_tables()? {
        let columns: Vec<Column> = backend
            .list_columns(&table)?
            .into_iter()
            .map(|c| {
                let class = imported.links.iter().find_map(|l| {
                    if l.left.table.as_str() == table.as_str() && *l.left.column == *c.name {
                        Some(l.left_class)
                    } else if l.right.table.as_str() == table.as_str() && *l.right.column == *c.name
                    {
                        Some(l.right_class)
                    } else {
                        None
                    }
                });
                Column::new(c.name, class)
            })
            .collect();
        catalog.push_table(TableRef::new(&table), columns)?;
    }
    for link in &imported.links {
        catalog.push_link(LinkDraft::from(link))?;
    }
    Ok((catalog, imported.skipped))
}
