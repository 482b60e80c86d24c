//! SQL text for join sequences, and policies for choosing among several
//! surviving sequences.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, ColumnRef};
use crate::error::{Error, Result};
use crate::planner::JoinSequence;
use crate::value::Value;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JoinType {
    #[default]
    Inner,
    Left,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<>")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "like")]
    Like,
}

impl CompareOp {
    fn sql(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Like => "LIKE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub column: ColumnRef,
    pub op: CompareOp,
    pub value: Value,
}

impl Filter {
    pub fn eq(column: ColumnRef, value: impl Into<Value>) -> Self {
        Filter {
            column,
            op: CompareOp::Eq,
            value: value.into(),
        }
    }

    /// `column=value`, `column<>value`, `column>=value` and friends; the value
    /// goes through [`Value::parse_literal`].
    pub fn parse(expr: &str) -> Result<Self> {
        const OPS: [(&str, CompareOp); 7] = [
            ("<>", CompareOp::Ne),
            ("!=", CompareOp::Ne),
            ("<=", CompareOp::Le),
            (">=", CompareOp::Ge),
            ("=", CompareOp::Eq),
            ("<", CompareOp::Lt),
            (">", CompareOp::Gt),
        ];
        let (pos, token, op) = OPS
            .iter()
            .filter_map(|(tok, op)| expr.find(tok).map(|p| (p, *tok, *op)))
            .min_by_key(|(p, tok, _)| (*p, std::cmp::Reverse(tok.len())))
            .ok_or_else(|| {
                Error::UnknownColumn(format!("{expr} (expected `table.column=value`)"))
            })?;
        let column = expr[..pos].trim().parse()?;
        let value = Value::parse_literal(expr[pos + token.len()..].trim());
        Ok(Filter { column, op, value })
    }
}

/// One executable query: a join sequence plus projection and filters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub sequence: JoinSequence,
    /// Empty means `SELECT *`. A column named `*` selects `table.*`.
    pub select: Vec<ColumnRef>,
    pub filters: Vec<Filter>,
    pub join_type: JoinType,
}

/// Projection, filters and join type to apply to every candidate sequence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryTemplate {
    pub select: Vec<ColumnRef>,
    pub filters: Vec<Filter>,
    pub join_type: JoinType,
}

impl QueryTemplate {
    pub fn spec_for(&self, sequence: &JoinSequence) -> QuerySpec {
        QuerySpec {
            sequence: sequence.clone(),
            select: self.select.clone(),
            filters: self.filters.clone(),
            join_type: self.join_type,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quoting {
    /// Always double-quote identifiers.
    Always,
    /// Quote only identifiers that are not plain `[A-Za-z_][A-Za-z0-9_]*` words
    /// or that collide with a reserved word.
    WhenNeeded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Placeholder {
    /// `?`
    Question,
    /// `?1`, `?2`, ...
    NumberedQuestion,
    /// `$1`, `$2`, ...
    Dollar,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dialect {
    pub quoting: Quoting,
    pub placeholder: Placeholder,
}

impl Dialect {
    pub const SQLITE: Dialect = Dialect {
        quoting: Quoting::WhenNeeded,
        placeholder: Placeholder::Question,
    };
    pub const ANSI: Dialect = Dialect {
        quoting: Quoting::Always,
        placeholder: Placeholder::Question,
    };
    pub const POSTGRES: Dialect = Dialect {
        quoting: Quoting::Always,
        placeholder: Placeholder::Dollar,
    };

    fn ident(&self, name: &str) -> String {
        match self.quoting {
            Quoting::Always => quote_ident(name),
            Quoting::WhenNeeded if is_plain_word(name) => name.to_owned(),
            Quoting::WhenNeeded => quote_ident(name),
        }
    }

    fn param(&self, n: usize) -> String {
        match self.placeholder {
            Placeholder::Question => "?".to_owned(),
            Placeholder::NumberedQuestion => format!("?{n}"),
            Placeholder::Dollar => format!("${n}"),
        }
    }
}

impl Default for Dialect {
    fn default() -> Self {
        Dialect::SQLITE
    }
}

/// SQL text with positional bind parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqlQuery {
    pub text: String,
    pub params: Vec<Value>,
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Standard SQL delimited identifier: wrapped in `"`, embedded `"` doubled.
pub fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

const RESERVED: &[&str] = &[
    "ALL",
    "AND",
    "ANY",
    "AS",
    "ASC",
    "BETWEEN",
    "BY",
    "CASE",
    "CAST",
    "CHECK",
    "COLLATE",
    "COLUMN",
    "CONSTRAINT",
    "CREATE",
    "CROSS",
    "CURRENT",
    "CURRENT_DATE",
    "CURRENT_TIME",
    "CURRENT_TIMESTAMP",
    "CURRENT_USER",
    "DEFAULT",
    "DELETE",
    "DESC",
    "DISTINCT",
    "DROP",
    "ELSE",
    "END",
    "ESCAPE",
    "EXCEPT",
    "EXISTS",
    "FALSE",
    "FETCH",
    "FOR",
    "FOREIGN",
    "FROM",
    "FULL",
    "GROUP",
    "HAVING",
    "IN",
    "INDEX",
    "INNER",
    "INSERT",
    "INTERSECT",
    "INTO",
    "IS",
    "JOIN",
    "KEY",
    "LEFT",
    "LIKE",
    "LIMIT",
    "NATURAL",
    "NOT",
    "NULL",
    "OFFSET",
    "ON",
    "OR",
    "ORDER",
    "OUTER",
    "PRIMARY",
    "REFERENCES",
    "RIGHT",
    "SELECT",
    "SET",
    "TABLE",
    "THEN",
    "TO",
    "TRUE",
    "UNION",
    "UNIQUE",
    "UPDATE",
    "USER",
    "USING",
    "VALUES",
    "WHEN",
    "WHERE",
    "WITH",
];

fn is_plain_word(name: &str) -> bool {
    let mut chars = name.chars();
    let head_ok = chars
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    head_ok
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.iter().any(|r| r.eq_ignore_ascii_case(name))
}

enum Projection {
    Select,
    Count,
}

/// `SELECT ... FROM origin JOIN ... ON ... [WHERE ...]`, one join per step in step order.
pub fn emit_sql(spec: &QuerySpec, dialect: &Dialect) -> Result<SqlQuery> {
    let mut params = Vec::new();
    let text = render(spec, dialect, Projection::Select, &mut params)?;
    Ok(SqlQuery { text, params })
}

/// `SELECT COUNT(*)` over the same joins and filters.
pub fn emit_count_sql(spec: &QuerySpec, dialect: &Dialect) -> Result<SqlQuery> {
    let mut params = Vec::new();
    let text = render(spec, dialect, Projection::Count, &mut params)?;
    Ok(SqlQuery { text, params })
}

fn render(
    spec: &QuerySpec,
    d: &Dialect,
    projection: Projection,
    params: &mut Vec<Value>,
) -> Result<String> {
    let seq = &spec.sequence;
    for c in spec
        .select
        .iter()
        .chain(spec.filters.iter().map(|f| &f.column))
    {
        if !seq.tables().contains(&c.table) {
            return Err(Error::ColumnOutsideSequence(c.to_string()));
        }
    }
    let col = |c: &ColumnRef| format!("{}.{}", d.ident(c.table.as_str()), d.ident(&c.column));

    let mut sql = String::from("SELECT ");
    match projection {
        Projection::Count => sql.push_str("COUNT(*)"),
        Projection::Select if spec.select.is_empty() => sql.push('*'),
        Projection::Select => {
            let mut name_uses: HashMap<&str, usize> = HashMap::new();
            for c in spec.select.iter().filter(|c| !c.is_wildcard()) {
                *name_uses.entry(&c.column).or_default() += 1;
            }
            let items: Vec<String> = spec
                .select
                .iter()
                .map(|c| {
                    if c.is_wildcard() {
                        format!("{}.*", d.ident(c.table.as_str()))
                    } else if name_uses[&*c.column] > 1 {
                        format!(
                            "{} AS {}",
                            col(c),
                            d.ident(&format!("{}__{}", c.table, c.column))
                        )
                    } else {
                        col(c)
                    }
                })
                .collect();
            sql.push_str(&items.join(", "));
        }
    }

    sql.push_str(" FROM ");
    sql.push_str(&d.ident(seq.origin.as_str()));

    let keyword = match spec.join_type {
        JoinType::Inner => "JOIN",
        JoinType::Left => "LEFT JOIN",
    };
    let mut joined: HashSet<&str> = HashSet::from([seq.origin.as_str()]);
    let mut clauses: Vec<String> = Vec::new();
    let mut extra: Vec<String> = Vec::new();
    for step in &seq.steps {
        let on = format!("{} = {}", col(&step.from), col(&step.to));
        if joined.insert(step.to.table.as_str()) {
            clauses.push(format!(
                "{keyword} {} ON {on}",
                d.ident(step.to.table.as_str())
            ));
        } else if let Some(last) = clauses.last_mut() {
            // Table already joined through another step: the condition still has to hold.
            last.push_str(" AND ");
            last.push_str(&on);
        } else {
            extra.push(on);
        }
    }
    for c in clauses {
        sql.push(' ');
        sql.push_str(&c);
    }

    let mut conditions = extra;
    for f in &spec.filters {
        let lhs = col(&f.column);
        conditions.push(match (&f.value, f.op) {
            (Value::Null, CompareOp::Eq) => format!("{lhs} IS NULL"),
            (Value::Null, CompareOp::Ne) => format!("{lhs} IS NOT NULL"),
            (v, op) => {
                params.push(v.clone());
                format!("{lhs} {} {}", op.sql(), d.param(params.len()))
            }
        });
    }
    if !conditions.is_empty() {
        sql.push_str(" WHERE ");
        sql.push_str(&conditions.join(" AND "));
    }
    Ok(sql)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionPolicy {
    /// One query per sequence, presented separately.
    #[default]
    All,
    /// A single `UNION` of every sequence's query.
    UnionDistinct,
    /// The sequence whose query returns the most rows.
    MostRows,
    /// Sequences traversing the fewest optional links.
    PreferMandatory,
}

impl FromStr for ResolutionPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "all" => Ok(ResolutionPolicy::All),
            "union_distinct" | "union" => Ok(ResolutionPolicy::UnionDistinct),
            "most_rows" => Ok(ResolutionPolicy::MostRows),
            "prefer_mandatory" => Ok(ResolutionPolicy::PreferMandatory),
            other => Err(format!(
                "unknown policy `{other}` (expected all, union-distinct, most-rows, prefer-mandatory)"
            )),
        }
    }
}

/// Counts result rows for a query. Implemented by the data engine.
pub trait RowCounter {
    fn count_rows(&self, query: &SqlQuery) -> Result<u64>;
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Resolution {
    pub policy: ResolutionPolicy,
    /// Indices into the input sequences that were kept.
    pub chosen: Vec<usize>,
    pub specs: Vec<QuerySpec>,
    /// Set for `UnionDistinct` with more than one sequence.
    pub union: Option<SqlQuery>,
    /// Per-input row counts, set for `MostRows`.
    pub row_counts: Option<Vec<u64>>,
}

impl Resolution {
    /// The statements to run: the union if present, otherwise one per spec.
    pub fn queries(&self, dialect: &Dialect) -> Result<Vec<SqlQuery>> {
        match &self.union {
            Some(u) => Ok(vec![u.clone()]),
            None => self.specs.iter().map(|s| emit_sql(s, dialect)).collect(),
        }
    }
}

pub struct Resolver<'a> {
    pub catalog: &'a Catalog,
    pub dialect: Dialect,
    pub executor: Option<&'a dyn RowCounter>,
}

impl<'a> Resolver<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        Resolver {
            catalog,
            dialect: Dialect::default(),
            executor: None,
        }
    }

    pub fn with_executor(mut self, executor: &'a dyn RowCounter) -> Self {
        self.executor = Some(executor);
        self
    }

    pub fn resolve(
        &self,
        sequences: &[JoinSequence],
        policy: ResolutionPolicy,
        template: &QueryTemplate,
    ) -> Result<Resolution> {
        if sequences.is_empty() {
            return Err(Error::NoJoinPath("the requested tables".into()));
        }
        let specs: Vec<QuerySpec> = sequences.iter().map(|s| template.spec_for(s)).collect();
        // A union reports misplaced columns as a mismatch between branches.
        if policy != ResolutionPolicy::UnionDistinct || specs.len() == 1 {
            for s in &specs {
                render(s, &self.dialect, Projection::Count, &mut Vec::new())?;
            }
        }
        let mut out = Resolution {
            policy,
            chosen: (0..specs.len()).collect(),
            specs,
            union: None,
            row_counts: None,
        };
        if sequences.len() == 1 {
            return Ok(out);
        }

        match policy {
            ResolutionPolicy::All => {}
            ResolutionPolicy::UnionDistinct => {
                out.union = Some(self.union(&out.specs)?);
            }
            ResolutionPolicy::MostRows => {
                let executor = self.executor.ok_or(Error::ExecutorRequired)?;
                let counts = out
                    .specs
                    .iter()
                    .map(|s| executor.count_rows(&emit_count_sql(s, &self.dialect)?))
                    .collect::<Result<Vec<u64>>>()?;
                let best =
                    counts
                        .iter()
                        .enumerate()
                        .fold(0, |best, (i, &n)| if n > counts[best] { i } else { best });
                out.chosen = vec![best];
                out.specs = vec![out.specs.swap_remove(best)];
                out.row_counts = Some(counts);
            }
            ResolutionPolicy::PreferMandatory => {
                let optional: Vec<usize> = sequences
                    .iter()
                    .map(|s| {
                        s.steps
                            .iter()
                            .filter(|st| {
                                !self
                                    .catalog
                                    .link(st.link_id.as_str())
                                    .is_some_and(|l| l.mandatory)
                            })
                            .count()
                    })
                    .collect();
                let fewest = *optional.iter().min().expect("non-empty");
                out.chosen = (0..sequences.len())
                    .filter(|&i| optional[i] == fewest)
                    .collect();
                out.specs = out.chosen.iter().map(|&i| out.specs[i].clone()).collect();
            }
        }
        Ok(out)
    }

    fn union(&self, specs: &[QuerySpec]) -> Result<SqlQuery> {
        if specs[0].select.is_empty() {
            return Err(Error::ColumnMismatch(
                "a union needs an explicit select list".into(),
            ));
        }
        let mut params = Vec::new();
        let mut branches = Vec::with_capacity(specs.len());
        for s in specs {
            branches.push(
                render(s, &self.dialect, Projection::Select, &mut params).map_err(|e| match e {
                    Error::ColumnOutsideSequence(c) => {
                        Error::ColumnMismatch(format!("`{c}` is not reachable in every sequence"))
                    }
                    other => other,
                })?,
            );
        }
        Ok(SqlQuery {
            text: branches.join(" UNION "),
            params,
        })
    }
}
