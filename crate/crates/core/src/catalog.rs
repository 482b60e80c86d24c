//! Schema metadata: tables, columns, uniqueness classes and typed links.
//!
//! A [`Catalog`] is a value. Every mutating operation returns a new catalog,
//! so a catalog shared behind an `Arc` never changes underneath a reader.

use std::borrow::Borrow;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Name of a table. Comparison is exact and case-sensitive.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TableRef(Arc<str>);

impl TableRef {
    pub fn new(name: impl AsRef<str>) -> Self {
        TableRef(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for TableRef {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TableRef {
    fn from(s: &str) -> Self {
        TableRef::new(s)
    }
}

impl From<String> for TableRef {
    fn from(s: String) -> Self {
        TableRef(Arc::from(s))
    }
}

/// A qualified column, written `table.column`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ColumnRef {
    pub table: TableRef,
    pub column: Arc<str>,
}

impl ColumnRef {
    pub fn new(table: impl Into<TableRef>, column: impl AsRef<str>) -> Self {
        ColumnRef {
            table: table.into(),
            column: Arc::from(column.as_ref()),
        }
    }

    /// `table.*`, the whole-table projection.
    pub fn is_wildcard(&self) -> bool {
        &*self.column == "*"
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.column)
    }
}

impl FromStr for ColumnRef {
    type Err = Error;

    /// Splits at the first `.`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('.') {
            Some((t, c)) if !t.is_empty() && !c.is_empty() => Ok(ColumnRef::new(t, c)),
            _ => Err(Error::UnknownColumn(format!(
                "{s} (expected `table.column`)"
            ))),
        }
    }
}

impl Serialize for ColumnRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ColumnRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether a joining column holds only unique values (`One`) or repeats (`Many`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnClass {
    One,
    Many,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipKind {
    OneToOne,
    ManyToOne,
    OneToMany,
    ManyToMany,
}

impl RelationshipKind {
    /// Many-to-many links never produce graph edges.
    pub fn is_connectable(self) -> bool {
        self != RelationshipKind::ManyToMany
    }
}

/// Classifies the ordered pair `(left, right)` of joining-column classes.
pub fn classify_relationship(left: ColumnClass, right: ColumnClass) -> RelationshipKind {
    use ColumnClass::*;
    match (left, right) {
        (One, One) => RelationshipKind::OneToOne,
        (Many, One) => RelationshipKind::ManyToOne,
        (One, Many) => RelationshipKind::OneToMany,
        (Many, Many) => RelationshipKind::ManyToMany,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(Arc<str>);

impl LinkId {
    pub fn new(id: impl AsRef<str>) -> Self {
        LinkId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for LinkId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for LinkId {
    fn from(s: &str) -> Self {
        LinkId::new(s)
    }
}

/// A single-column foreign-key style connection between two tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Link {
    pub id: LinkId,
    pub left: ColumnRef,
    pub right: ColumnRef,
    pub left_class: ColumnClass,
    pub right_class: ColumnClass,
    pub kind: RelationshipKind,
    /// Whether the referencing column is non-nullable.
    pub mandatory: bool,
}

/// Input to [`Catalog::add_link`]. Unset classes are taken from the catalog's columns.
#[derive(Clone, Debug)]
pub struct LinkDraft {
    pub id: Option<LinkId>,
    pub left: ColumnRef,
    pub right: ColumnRef,
    pub left_class: Option<ColumnClass>,
    pub right_class: Option<ColumnClass>,
    pub mandatory: bool,
}

impl LinkDraft {
    pub fn new(left: ColumnRef, right: ColumnRef) -> Self {
        LinkDraft {
            id: None,
            left,
            right,
            left_class: None,
            right_class: None,
            mandatory: false,
        }
    }

    pub fn classes(mut self, left: ColumnClass, right: ColumnClass) -> Self {
        self.left_class = Some(left);
        self.right_class = Some(right);
        self
    }

    pub fn mandatory(mut self, mandatory: bool) -> Self {
        self.mandatory = mandatory;
        self
    }

    pub fn id(mut self, id: impl Into<LinkId>) -> Self {
        self.id = Some(id.into());
        self
    }
}

impl From<&Link> for LinkDraft {
    fn from(link: &Link) -> Self {
        LinkDraft {
            id: Some(link.id.clone()),
            left: link.left.clone(),
            right: link.right.clone(),
            left_class: Some(link.left_class),
            right_class: Some(link.right_class),
            mandatory: link.mandatory,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: Arc<str>,
    pub class: Option<ColumnClass>,
}

impl Column {
    pub fn new(name: impl AsRef<str>, class: Option<ColumnClass>) -> Self {
        Column {
            name: Arc::from(name.as_ref()),
            class,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub name: TableRef,
    pub columns: Vec<Column>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| &*c.name == name)
    }
}

/// Tables (in declaration order), their columns, and the links between them.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Catalog {
    tables: Vec<Table>,
    links: Vec<Link>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name.as_str() == name)
    }

    pub fn contains_table(&self, name: &str) -> bool {
        self.table(name).is_some()
    }

    pub fn column(&self, col: &ColumnRef) -> Option<&Column> {
        self.table(col.table.as_str())?.column(&col.column)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: &str) -> Option<&Link> {
        self.links.iter().find(|l| l.id.as_str() == id)
    }

    /// Returns a catalog with `name` appended. Columns start unclassified unless given.
    pub fn with_table<I, C>(&self, name: impl Into<TableRef>, columns: I) -> Result<Catalog>
    where
        I: IntoIterator<Item = C>,
        C: Into<Column>,
    {
        let mut next = self.clone();
        next.push_table(name.into(), columns.into_iter().map(Into::into).collect())?;
        Ok(next)
    }

    /// Returns a catalog with the column's class replaced.
    pub fn with_column_class(
        &self,
        col: &ColumnRef,
        class: Option<ColumnClass>,
    ) -> Result<Catalog> {
        let mut next = self.clone();
        let column = next
            .tables
            .iter_mut()
            .find(|t| t.name == col.table)
            .and_then(|t| t.columns.iter_mut().find(|c| c.name == col.column))
            .ok_or_else(|| Error::UnknownColumn(col.to_string()))?;
        column.class = class;
        Ok(next)
    }

    /// Returns a catalog with the link appended under a fresh (or the requested) id.
    pub fn add_link(&self, draft: LinkDraft) -> Result<Catalog> {
        let mut next = self.clone();
        next.push_link(draft)?;
        Ok(next)
    }

    pub fn without_link(&self, id: &str) -> Result<Catalog> {
        let mut next = self.clone();
        let before = next.links.len();
        next.links.retain(|l| l.id.as_str() != id);
        if next.links.len() == before {
            return Err(Error::UnknownLinkSelected(id.to_owned()));
        }
        Ok(next)
    }

    /// The id `add_link` would assign to a new `left -> right` link.
    pub fn fresh_link_id(&self, left: &TableRef, right: &TableRef) -> LinkId {
        fresh_id(&format!("{left}__{right}"), |id| self.link(id).is_some())
    }

    pub(crate) fn push_table(&mut self, name: TableRef, columns: Vec<Column>) -> Result<()> {
        if name.as_str().is_empty() {
            return Err(Error::UnknownTable(String::new()));
        }
        if self.contains_table(name.as_str()) {
            return Err(Error::DuplicateTable(name.to_string()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.is_empty() || !seen.insert(c.name.clone()) {
                return Err(Error::DuplicateColumn(format!("{name}.{}", c.name)));
            }
        }
        self.tables.push(Table { name, columns });
        Ok(())
    }

    pub(crate) fn push_link(&mut self, draft: LinkDraft) -> Result<LinkId> {
        if draft.left.table == draft.right.table {
            return Err(Error::SelfReferencingLink {
                left: draft.left.to_string(),
                right: draft.right.to_string(),
            });
        }
        let left_col = self
            .column(&draft.left)
            .ok_or_else(|| Error::UnknownColumn(draft.left.to_string()))?;
        let right_col = self
            .column(&draft.right)
            .ok_or_else(|| Error::UnknownColumn(draft.right.to_string()))?;
        let left_class = draft
            .left_class
            .or(left_col.class)
            .ok_or_else(|| Error::UnknownClass(draft.left.to_string()))?;
        let right_class = draft
            .right_class
            .or(right_col.class)
            .ok_or_else(|| Error::UnknownClass(draft.right.to_string()))?;
        let id = match draft.id {
            Some(id) if self.link(id.as_str()).is_some() => {
                return Err(Error::DuplicateLinkId(id.to_string()))
            }
            Some(id) => id,
            None => self.fresh_link_id(&draft.left.table, &draft.right.table),
        };
        self.links.push(Link {
            id: id.clone(),
            left: draft.left,
            right: draft.right,
            left_class,
            right_class,
            kind: classify_relationship(left_class, right_class),
            mandatory: draft.mandatory,
        });
        Ok(id)
    }
}

impl From<&str> for Column {
    fn from(name: &str) -> Self {
        Column::new(name, None)
    }
}

impl From<String> for Column {
    fn from(name: String) -> Self {
        Column::new(name, None)
    }
}

impl From<(&str, ColumnClass)> for Column {
    fn from((name, class): (&str, ColumnClass)) -> Self {
        Column::new(name, Some(class))
    }
}

pub(crate) fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> LinkId {
    if !taken(base) {
        return LinkId::new(base);
    }
    (2..)
        .map(|n| format!("{base}_{n}"))
        .find(|id| !taken(id))
        .map(LinkId::new)
        .expect("unbounded suffix search")
}
