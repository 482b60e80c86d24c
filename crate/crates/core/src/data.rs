//! CSV ingestion into an in-process SQLite database, read-only execution and
//! column scans.
//!
//! Each `*.csv` file in a directory becomes a table named after the file stem.
//! The first row is the header. Empty fields load as NULL. A column whose
//! non-empty values all parse as integers is stored as `INTEGER`; failing
//! that, if all parse as decimals, `REAL`; otherwise `TEXT`. Integers written
//! with a leading zero (`"007"`) keep the text form.

use std::path::{Path, PathBuf};
use std::sync::{Mutex, MutexGuard};

use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Column, ColumnClass, ColumnRef, RelationshipKind, TableRef};
use crate::error::{Error, Result};
use crate::inference::{
    infer_column_class, DeclaredForeignKey, IntrospectedColumn, SchemaIntrospector,
    UniquenessReport,
};
use crate::sql::{quote_ident, RowCounter, SqlQuery};
use crate::value::{parse_integer, parse_real, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Real,
    Text,
}

impl ColumnType {
    fn sql(self) -> &'static str {
        match self {
            ColumnType::Integer => "INTEGER",
            ColumnType::Real => "REAL",
            ColumnType::Text => "TEXT",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetColumn {
    pub name: String,
    pub ty: ColumnType,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetTable {
    pub name: TableRef,
    pub file: PathBuf,
    pub columns: Vec<DatasetColumn>,
    pub row_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Clone, Debug, Default)]
pub struct IngestOptions<'a> {
    /// Declares this catalog's links as `FOREIGN KEY` constraints, its `One`
    /// columns as `UNIQUE` and mandatory referencing columns as `NOT NULL`.
    pub declare: Option<&'a Catalog>,
}

/// Loaded tables plus the backend holding them. Read-only after ingestion.
pub struct Dataset {
    root: PathBuf,
    tables: Vec<DatasetTable>,
    conn: Mutex<Connection>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("root", &self.root)
            .field("tables", &self.tables)
            .finish_non_exhaustive()
    }
}

struct ParsedCsv {
    name: TableRef,
    file: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Dataset {
    /// Loads every CSV in `dir`; returns the dataset and an unclassified catalog skeleton.
    pub fn ingest_csv_dir(dir: impl AsRef<Path>) -> Result<(Dataset, Catalog)> {
        Self::ingest_csv_dir_with(dir, &IngestOptions::default())
    }

    pub fn ingest_csv_dir_with(
        dir: impl AsRef<Path>,
        options: &IngestOptions<'_>,
    ) -> Result<(Dataset, Catalog)> {
        let dir = dir.as_ref();
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| {
                p.is_file()
                    && p.extension()
                        .and_then(|x| x.to_str())
                        .is_some_and(|x| x.eq_ignore_ascii_case("csv"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::EmptyDirectory(dir.to_owned()));
        }

        let parsed = files
            .iter()
            .map(|f| read_csv(f))
            .collect::<Result<Vec<_>>>()?;

        let mut conn = Connection::open_in_memory()?;
        // Declared keys are metadata only; rows load in file order.
        conn.pragma_update(None, "foreign_keys", false)?;
        let mut tables = Vec::with_capacity(parsed.len());
        let mut catalog = Catalog::new();
        {
            let tx = conn.transaction()?;
            for csv in &parsed {
                let types = column_types(csv);
                tx.execute_batch(&create_table_sql(csv, &types, options.declare))?;
                let placeholders = vec!["?"; csv.header.len()].join(", ");
                let mut insert = tx.prepare(&format!(
                    "INSERT INTO {} VALUES ({placeholders})",
                    quote_ident(csv.name.as_str())
                ))?;
                for row in &csv.rows {
                    let values: Vec<Value> = row
                        .iter()
                        .zip(&types)
                        .map(|(field, ty)| typed(field, *ty))
                        .collect();
                    insert
                        .execute(rusqlite::params_from_iter(values.iter()))
                        .map_err(|e| Error::MalformedCsv {
                            file: csv.file.clone(),
                            message: e.to_string(),
                        })?;
                }
                tables.push(DatasetTable {
                    name: csv.name.clone(),
                    file: csv.file.clone(),
                    columns: csv
                        .header
                        .iter()
                        .zip(&types)
                        .map(|(n, t)| DatasetColumn {
                            name: n.clone(),
                            ty: *t,
                        })
                        .collect(),
                    row_count: csv.rows.len() as u64,
                });
                catalog.push_table(
                    csv.name.clone(),
                    csv.header.iter().map(|h| Column::new(h, None)).collect(),
                )?;
            }
            tx.commit()?;
        }
        conn.pragma_update(None, "query_only", true)?;

        Ok((
            Dataset {
                root: dir.to_owned(),
                tables,
                conn: Mutex::new(conn),
            },
            catalog,
        ))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn tables(&self) -> &[DatasetTable] {
        &self.tables
    }

    pub fn table(&self, name: &str) -> Option<&DatasetTable> {
        self.tables.iter().find(|t| t.name.as_str() == name)
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Runs one read-only statement with positional parameters.
    pub fn execute(&self, sql: &str, params: &[Value]) -> Result<RowSet> {
        let conn = self.conn();
        let mut stmt = conn.prepare(sql)?;
        if !stmt.readonly() {
            return Err(Error::WriteRejected);
        }
        let columns: Vec<String> = stmt.column_names().into_iter().map(str::to_owned).collect();
        let width = columns.len();
        let rows = stmt
            .query_map(rusqlite::params_from_iter(params.iter()), |row| {
                (0..width).map(|i| row.get::<_, Value>(i)).collect()
            })?
            .collect::<rusqlite::Result<Vec<Vec<Value>>>>()?;
        Ok(RowSet { columns, rows })
    }

    pub fn query(&self, query: &SqlQuery) -> Result<RowSet> {
        self.execute(&query.text, &query.params)
    }

    /// All values of one column in file order, nulls preserved.
    pub fn scan_column(&self, column: &ColumnRef) -> Result<Vec<Value>> {
        let known = self
            .table(column.table.as_str())
            .is_some_and(|t| t.columns.iter().any(|c| *c.name == *column.column));
        if !known {
            return Err(Error::UnknownColumn(column.to_string()));
        }
        let rows = self.execute(
            &format!(
                "SELECT {} FROM {} ORDER BY rowid",
                quote_ident(&column.column),
                quote_ident(column.table.as_str())
            ),
            &[],
        )?;
        Ok(rows.rows.into_iter().map(|mut r| r.remove(0)).collect())
    }

    pub fn uniqueness(&self, column: &ColumnRef) -> Result<UniquenessReport> {
        Ok(infer_column_class(
            column.clone(),
            &self.scan_column(column)?,
        ))
    }

    /// Scans every catalog column present in the dataset and sets its class.
    pub fn classify(&self, catalog: &Catalog) -> Result<(Catalog, Vec<UniquenessReport>)> {
        let mut out = catalog.clone();
        let mut reports = Vec::new();
        for t in catalog.tables() {
            let Some(dt) = self.table(t.name.as_str()) else {
                continue;
            };
            for c in &t.columns {
                if !dt.columns.iter().any(|d| *d.name == *c.name) {
                    continue;
                }
                let col = ColumnRef::new(t.name.clone(), &c.name);
                let report = self.uniqueness(&col)?;
                out = out.with_column_class(&col, Some(report.inferred_class))?;
                reports.push(report);
            }
        }
        Ok((out, reports))
    }

    /// Writes the database to a standalone SQLite file.
    pub fn export_sqlite(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let target = path
            .to_str()
            .ok_or_else(|| Error::Sql(format!("non UTF-8 path {}", path.display())))?;
        let conn = self.conn();
        conn.pragma_update(None, "query_only", false)?;
        let res = conn.execute("VACUUM INTO ?1", [target]);
        conn.pragma_update(None, "query_only", true)?;
        res?;
        Ok(())
    }
}

impl RowCounter for Dataset {
    fn count_rows(&self, query: &SqlQuery) -> Result<u64> {
        let rows = self.query(query)?;
        match rows.rows.first().and_then(|r| r.first()) {
            Some(Value::Integer(n)) => Ok(*n as u64),
            other => Err(Error::Sql(format!("count query returned {other:?}"))),
        }
    }
}

impl SchemaIntrospector for Dataset {
    fn list_tables(&self) -> Result<Vec<String>> {
        sqlite_tables(&self.conn())
    }
    fn list_columns(&self, table: &str) -> Result<Vec<IntrospectedColumn>> {
        sqlite_columns(&self.conn(), table)
    }
    fn list_foreign_keys(&self, table: &str) -> Result<Vec<DeclaredForeignKey>> {
        sqlite_foreign_keys(&self.conn(), table)
    }
}

/// Introspection over an existing SQLite database file, opened read-only.
pub struct SqliteIntrospector {
    conn: Connection,
}

impl SqliteIntrospector {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let conn = Connection::open_with_flags(path, OpenFlags::SQLITE_OPEN_READ_ONLY)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", path.display())))?;
        // Opening is lazy; touch the schema so a non-database file fails here.
        sqlite_tables(&conn)
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", path.display())))?;
        Ok(SqliteIntrospector { conn })
    }
}

impl SchemaIntrospector for SqliteIntrospector {
    fn list_tables(&self) -> Result<Vec<String>> {
        sqlite_tables(&self.conn)
    }
    fn list_columns(&self, table: &str) -> Result<Vec<IntrospectedColumn>> {
        sqlite_columns(&self.conn, table)
    }
    fn list_foreign_keys(&self, table: &str) -> Result<Vec<DeclaredForeignKey>> {
        sqlite_foreign_keys(&self.conn, table)
    }
}

fn sqlite_tables(conn: &Connection) -> Result<Vec<String>> {
    let mut stmt = conn.prepare(
        "SELECT name FROM sqlite_schema WHERE type = 'table' AND name NOT LIKE 'sqlite_%' ORDER BY name",
    )?;
    let names = stmt
        .query_map([], |r| r.get(0))?
        .collect::<rusqlite::Result<Vec<String>>>()?;
    Ok(names)
}

fn sqlite_columns(conn: &Connection, table: &str) -> Result<Vec<IntrospectedColumn>> {
    let mut stmt =
        conn.prepare("SELECT name, \"notnull\", pk FROM pragma_table_info(?1) ORDER BY cid")?;
    let raw = stmt
        .query_map([table], |r| {
            Ok((
                r.get::<_, String>(0)?,
                r.get::<_, bool>(1)?,
                r.get::<_, i64>(2)?,
            ))
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    if raw.is_empty() {
        return Err(Error::UnknownTable(table.to_owned()));
    }
    let pk_width = raw.iter().filter(|(_, _, pk)| *pk > 0).count();

    let mut unique_singles: Vec<String> = Vec::new();
    let mut idx = conn.prepare("SELECT name FROM pragma_index_list(?1) WHERE \"unique\" = 1")?;
    let indexes = idx
        .query_map([table], |r| r.get::<_, String>(0))?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    let mut info = conn.prepare("SELECT name FROM pragma_index_info(?1)")?;
    for index in indexes {
        let cols = info
            .query_map([&index], |r| r.get::<_, Option<String>>(0))?
            .collect::<rusqlite::Result<Vec<_>>>()?;
        if let [Some(c)] = cols.as_slice() {
            unique_singles.push(c.clone());
        }
    }

    Ok(raw
        .into_iter()
        .map(|(name, not_null, pk)| {
            let single_pk = pk > 0 && pk_width == 1;
            IntrospectedColumn {
                unique: single_pk || unique_singles.contains(&name),
                not_null: not_null || single_pk,
                primary_key: pk > 0,
                name,
            }
        })
        .collect())
}

fn sqlite_foreign_keys(conn: &Connection, table: &str) -> Result<Vec<DeclaredForeignKey>> {
    let mut stmt = conn.prepare(
        "SELECT id, \"table\", \"from\", \"to\" FROM pragma_foreign_key_list(?1) ORDER BY id, seq",
    )?;
    let rows = stmt
        .query_map([table], |r| {
            Ok((
                r.get::<_, i64>(0)?,
                r.get::<_, String>(1)?,
                r.get::<_, String>(2)?,
                r.get::<_, Option<String>>(3)?,
            ))
        })?
        .collect::<rusqlite::Result<Vec<_>>>()?;
    let mut out: Vec<(i64, DeclaredForeignKey)> = Vec::new();
    for (id, parent, from, to) in rows {
        match out.last_mut() {
            Some((last, fk)) if *last == id => {
                fk.columns.push(from);
                fk.referenced_columns.push(to);
            }
            _ => out.push((
                id,
                DeclaredForeignKey {
                    table: table.to_owned(),
                    columns: vec![from],
                    referenced_table: parent,
                    referenced_columns: vec![to],
                },
            )),
        }
    }
    // pragma ids count down in declaration order reversed; present them as declared.
    out.sort_by_key(|(id, _)| std::cmp::Reverse(*id));
    Ok(out.into_iter().map(|(_, fk)| fk).collect())
}

fn read_csv(file: &Path) -> Result<ParsedCsv> {
    let malformed = |message: String| Error::MalformedCsv {
        file: file.to_owned(),
        message,
    };
    let name = file
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| malformed("file name is not valid UTF-8".into()))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(file)
        .map_err(|e| malformed(e.to_string()))?;

    let mut header: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if let Some(first) = header.first_mut() {
        if let Some(stripped) = first.strip_prefix('\u{feff}') {
            *first = stripped.to_owned();
        }
    }
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(malformed("header row has an empty column name".into()));
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(Error::DuplicateHeader {
                file: file.to_owned(),
                column: h.clone(),
            });
        }
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(e.to_string()))?;
        if record.len() != header.len() {
            return Err(Error::RaggedRow {
                file: file.to_owned(),
                line: record.position().map_or(0, |p| p.line()),
                expected: header.len(),
                found: record.len(),
            });
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(ParsedCsv {
        name: TableRef::new(name),
        file: file.to_owned(),
        header,
        rows,
    })
}

fn column_types(csv: &ParsedCsv) -> Vec<ColumnType> {
    (0..csv.header.len())
        .map(|i| {
            let values: Vec<&str> = csv
                .rows
                .iter()
                .map(|r| r[i].as_str())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                ColumnType::Text
            } else if values.iter().all(|v| parse_integer(v).is_some()) {
                ColumnType::Integer
            } else if values.iter().all(|v| parse_real(v).is_some()) {
                ColumnType::Real
            } else {
                ColumnType::Text
            }
        })
        .collect()
}

fn typed(field: &str, ty: ColumnType) -> Value {
    if field.is_empty() {
        return Value::Null;
    }
    match ty {
        ColumnType::Integer => parse_integer(field).map_or(Value::Null, Value::Integer),
        ColumnType::Real => parse_real(field).map_or(Value::Null, Value::Real),
        ColumnType::Text => Value::Text(field.to_owned()),
    }
}

fn create_table_sql(csv: &ParsedCsv, types: &[ColumnType], declare: Option<&Catalog>) -> String {
    let table = csv.name.as_str();
    let mut unique: Vec<&str> = Vec::new();
    let mut not_null: Vec<&str> = Vec::new();
    let mut fks: Vec<String> = Vec::new();

    if let Some(catalog) = declare {
        if let Some(t) = catalog.table(table) {
            for c in &t.columns {
                if c.class == Some(ColumnClass::One) {
                    unique.push(&c.name);
                }
            }
        }
        for link in catalog.links() {
            let (child, parent, child_class, parent_class) = match link.kind {
                RelationshipKind::ManyToOne | RelationshipKind::OneToOne => {
                    (&link.left, &link.right, link.left_class, link.right_class)
                }
                RelationshipKind::OneToMany => {
                    (&link.right, &link.left, link.right_class, link.left_class)
                }
                RelationshipKind::ManyToMany => continue,
            };
            if child_class == ColumnClass::One && child.table.as_str() == table {
                unique.push(&child.column);
            }
            if parent_class == ColumnClass::One && parent.table.as_str() == table {
                unique.push(&parent.column);
            }
            if child.table.as_str() != table {
                continue;
            }
            if link.mandatory {
                not_null.push(&child.column);
            }
            fks.push(format!(
                "FOREIGN KEY ({}) REFERENCES {} ({})",
                quote_ident(&child.column),
                quote_ident(parent.table.as_str()),
                quote_ident(&parent.column)
            ));
        }
    }

    let mut parts: Vec<String> = csv
        .header
        .iter()
        .zip(types)
        .map(|(h, t)| {
            let mut def = format!("{} {}", quote_ident(h), t.sql());
            if not_null.contains(&h.as_str()) {
                def.push_str(" NOT NULL");
            }
            if unique.contains(&h.as_str()) {
                def.push_str(" UNIQUE");
            }
            def
        })
        .collect();
    parts.extend(fks);
    format!(
        "CREATE TABLE {} (\n  {}\n);",
        quote_ident(table),
        parts.join(",\n  ")
    )
}
