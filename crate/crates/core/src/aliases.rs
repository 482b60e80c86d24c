//! Short names for tables, e.g. `ORS` for `order_details`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnRef, TableRef};
use crate::error::{Error, Result};

/// Alias → table name. Stored on disk as a flat JSON object.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TableAliases(BTreeMap<String, TableRef>);

impl TableAliases {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, alias: impl Into<String>, table: impl Into<TableRef>) {
        self.0.insert(alias.into(), table.into());
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedMetadata {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TableRef)> {
        self.0.iter().map(|(a, t)| (a.as_str(), t))
    }

    /// Alias for `table`, if one is defined.
    pub fn alias_of(&self, table: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(_, t)| t.as_str() == table)
            .map(|(a, _)| a.as_str())
    }

    /// Real table names win over aliases; unknown names pass through unchanged.
    pub fn table(&self, catalog: &Catalog, name: &str) -> TableRef {
        if catalog.contains_table(name) {
            return TableRef::new(name);
        }
        self.0
            .get(name)
            .cloned()
            .unwrap_or_else(|| TableRef::new(name))
    }

    pub fn column(&self, catalog: &Catalog, column: &ColumnRef) -> ColumnRef {
        ColumnRef {
            table: self.table(catalog, column.table.as_str()),
            column: column.column.clone(),
        }
    }
}
