//! Versioned JSON metadata document from which a [`Catalog`] is regenerated.
//!
//! ```json
//! { "version": 1,
//!   "tables": [{ "name": "orders", "columns": [{ "name": "orderID", "class": "one" }] }],
//!   "links":  [{ "id": "order_details__orders", "left": "order_details.orderID",
//!                "right": "orders.orderID", "left_class": "many", "right_class": "one",
//!                "mandatory": true }] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Column, ColumnClass, ColumnRef, LinkDraft, LinkId, TableRef};
use crate::error::{Error, Result};

pub const METADATA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    version: u32,
    #[serde(default)]
    tables: Vec<TableDoc>,
    #[serde(default)]
    links: Vec<LinkDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    name: String,
    #[serde(default)]
    columns: Vec<ColumnDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ColumnDoc {
    name: String,
    #[serde(default)]
    class: Option<ColumnClass>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    id: String,
    left: String,
    right: String,
    #[serde(default)]
    left_class: Option<ColumnClass>,
    #[serde(default)]
    right_class: Option<ColumnClass>,
    #[serde(default)]
    mandatory: bool,
}

/// Serializes the catalog as a pretty-printed metadata document.
pub fn save_catalog(catalog: &Catalog) -> String {
    let doc = Document {
        version: METADATA_VERSION,
        tables: catalog
            .tables()
            .iter()
            .map(|t| TableDoc {
                name: t.name.to_string(),
                columns: t
                    .columns
                    .iter()
                    .map(|c| ColumnDoc {
                        name: c.name.to_string(),
                        class: c.class,
                    })
                    .collect(),
            })
            .collect(),
        links: catalog
            .links()
            .iter()
            .map(|l| LinkDoc {
                id: l.id.to_string(),
                left: l.left.to_string(),
                right: l.right.to_string(),
                left_class: Some(l.left_class),
                right_class: Some(l.right_class),
                mandatory: l.mandatory,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("metadata serializes");
    out.push('\n');
    out
}

pub fn load_catalog(source: &str) -> Result<Catalog> {
    let doc: Document = serde_json::from_str(source).map_err(|e| Error::MalformedMetadata {
        location: format!("line {}, column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    if doc.version != METADATA_VERSION {
        return Err(malformed(
            "version",
            format!(
                "unsupported version {} (expected {METADATA_VERSION})",
                doc.version
            ),
        ));
    }

    let mut catalog = Catalog::new();
    for (i, t) in doc.tables.into_iter().enumerate() {
        let columns = t
            .columns
            .into_iter()
            .map(|c| Column::new(c.name, c.class))
            .collect();
        catalog
            .push_table(TableRef::from(t.name), columns)
            .map_err(|e| malformed(format!("tables[{i}]"), e.to_string()))?;
    }
    for (i, l) in doc.links.into_iter().enumerate() {
        let left: ColumnRef = l
            .left
            .parse()
            .map_err(|e: Error| malformed(format!("links[{i}].left"), e.to_string()))?;
        let right: ColumnRef = l
            .right
            .parse()
            .map_err(|e: Error| malformed(format!("links[{i}].right"), e.to_string()))?;
        for (side, c) in [("left", &left), ("right", &right)] {
            if catalog.column(c).is_none() {
                return Err(malformed(
                    format!("links[{i}].{side}"),
                    format!("endpoint `{c}` is not a catalog column"),
                ));
            }
        }
        let draft = LinkDraft {
            id: Some(LinkId::new(&l.id)),
            left,
            right,
            left_class: l.left_class,
            right_class: l.right_class,
            mandatory: l.mandatory,
        };
        catalog
            .push_link(draft)
            .map_err(|e| malformed(format!("links[{i}]"), e.to_string()))?;
    }
    Ok(catalog)
}

pub fn save_catalog_file(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, save_catalog(catalog)).map_err(|e| Error::io(path, e))
}

pub fn load_catalog_file(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_catalog(&text)
}

fn malformed(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::MalformedMetadata {
        location: location.into(),
        message: message.into(),
    }
}
