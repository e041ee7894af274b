//! Typed in-memory relations and problem files.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Str(String),
}

impl Value {
    pub fn ty(&self) -> ColumnType {
        match self {
            Value::Int(_) => ColumnType::Int,
            Value::Str(_) => ColumnType::Str,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int,
    Str,
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Int => "int",
            ColumnType::Str => "str",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: ColumnType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

/// A relation whose rows always match its column types.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("table `{table}`: row {row} has {found} cells, expected {expected}")]
    Arity {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table `{table}`: row {row}, column `{column}` holds {found}, expected {expected}")]
    Type {
        table: String,
        row: usize,
        column: String,
        expected: ColumnType,
        found: String,
    },
    #[error("table `{table}`: duplicate column `{column}`")]
    DuplicateColumn { table: String, column: String },
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<Value>>,
    ) -> Result<Table, TableError> {
        let name = name.into();
        for (i, col) in columns.iter().enumerate() {
            if columns[..i].iter().any(|c| c.name == col.name) {
                return Err(TableError::DuplicateColumn {
                    table: name,
                    column: col.name.clone(),
                });
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::Arity {
                    table: name,
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if cell.ty() != col.ty {
                    return Err(TableError::Type {
                        table: name,
                        row: r,
                        column: col.name.clone(),
                        expected: col.ty,
                        found: format!("{cell:?}"),
                    });
                }
            }
        }
        Ok(Table {
            name,
            columns,
            rows,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> + Clone {
        self.columns.iter().map(|c| c.name.as_str())
    }
}

/// Equality of two tables as query results.
///
/// Column names, order and types must agree. Rows are compared as sequences
/// when `ordered`, otherwise as multisets.
///
/// ```
/// use sqlmend::table::{tables_equal, Column, ColumnType, Table, Value};
///
/// let cols = vec![Column::new("a", ColumnType::Int)];
/// let a = Table::new("t", cols.clone(), vec![vec![Value::Int(1)], vec![Value::Int(2)]]).unwrap();
/// let b = Table::new("t", cols, vec![vec![Value::Int(2)], vec![Value::Int(1)]]).unwrap();
/// assert!(tables_equal(&a, &b, false));
/// assert!(!tables_equal(&a, &b, true));
/// ```
pub fn tables_equal(a: &Table, b: &Table, ordered: bool) -> bool {
    if a.columns != b.columns || a.rows.len() != b.rows.len() {
        return false;
    }
    if ordered {
        return a.rows == b.rows;
    }
    let mut x: Vec<_> = a.rows.iter().collect();
    let mut y: Vec<_> = b.rows.iter().collect();
    x.sort();
    y.sort();
    x == y
}

/// One example: running the query on `source` must produce `destination`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TablePair {
    pub source: Table,
    pub destination: Table,
    pub ordered: bool,
}

/// A problem and its example set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ProblemSpec {
    pub id: String,
    pub description: String,
    pub pairs: Vec<TablePair>,
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("type error: {0}")]
    Type(TableError),
    #[error("arity error: {0}")]
    Arity(TableError),
}

impl From<TableError> for ProblemError {
    fn from(e: TableError) -> Self {
        match e {
            TableError::Arity { .. } => ProblemError::Arity(e),
            TableError::Type { .. } => ProblemError::Type(e),
            TableError::DuplicateColumn { .. } => ProblemError::Schema(e.to_string()),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    id: String,
    #[serde(default)]
    description: String,
    #[serde(default)]
    ordered: bool,
    pairs: Vec<RawPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    source: RawTable,
    destination: RawTable,
    #[serde(default)]
    ordered: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    #[serde(default)]
    name: String,
    columns: Vec<Column>,
    rows: Vec<Vec<serde_json::Value>>,
}

impl RawTable {
    fn into_table(self) -> Result<Table, ProblemError> {
        let name = self.name;
        let rows = self
            .rows
            .into_iter()
            .enumerate()
            .map(|(r, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(c, cell)| match cell {
                        serde_json::Value::String(s) => Ok(Value::Str(s)),
                        serde_json::Value::Number(n) => {
                            n.as_i64().map(Value::Int).ok_or_else(|| {
                                ProblemError::Schema(format!(
                                "table `{name}`: row {r}, cell {c}: {n} is not a 64-bit integer"
                            ))
                            })
                        }
                        other => Err(ProblemError::Schema(format!(
                            "table `{name}`: row {r}, cell {c}: unsupported value {other}"
                        ))),
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Table::new(name, self.columns, rows)?)
    }
}

impl ProblemSpec {
    /// Parses and validates a problem from its JSON text.
    pub fn from_json(text: &str) -> Result<ProblemSpec, ProblemError> {
        let raw: RawProblem =
            serde_json::from_str(text).map_err(|e| ProblemError::Schema(e.to_string()))?;
        if raw.pairs.is_empty() {
            return Err(ProblemError::Schema(format!(
                "problem `{}` has no pairs",
                raw.id
            )));
        }
        let mut pairs = Vec::with_capacity(raw.pairs.len());
        for pair in raw.pairs {
            pairs.push(TablePair {
                source: pair.source.into_table()?,
                destination: pair.destination.into_table()?,
                ordered: pair.ordered.unwrap_or(raw.ordered),
            });
        }
        let first = &pairs[0];
        for (i, pair) in pairs.iter().enumerate().skip(1) {
            if pair.source.name != first.source.name || pair.source.columns != first.source.columns
            {
                return Err(ProblemError::Schema(format!(
                    "problem `{}`: pair {i} source schema differs from pair 0",
                    raw.id
                )));
            }
            if pair.destination.columns != first.destination.columns {
                return Err(ProblemError::Schema(format!(
                    "problem `{}`: pair {i} destination schema differs from pair 0",
                    raw.id
                )));
            }
        }
        Ok(ProblemSpec {
            id: raw.id,
            description: raw.description,
            pairs,
        })
    }

    pub fn source_schema(&self) -> &Table {
        &self.pairs[0].source
    }

    pub fn destination_columns(&self) -> &[Column] {
        &self.pairs[0].destination.columns
    }

    pub fn to_json(&self) -> serde_json::Value {
        let table =
            |t: &Table| serde_json::json!({ "name": t.name, "columns": t.columns, "rows": t.rows });
        let ordered = self.pairs.iter().any(|p| p.ordered);
        serde_json::json!({
            "id": self.id,
            "description": self.description,
            "ordered": ordered,
            "pairs": self.pairs.iter().map(|p| {
                let mut v = serde_json::json!({
                    "source": table(&p.source),
                    "destination": table(&p.destination),
                });
                if p.ordered != ordered {
                    v["ordered"] = p.ordered.into();
                }
                v
            }).collect::<Vec<_>>(),
        })
    }
}

pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemSpec, ProblemError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ProblemError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ProblemSpec::from_json(&text)
}

/// Loads every `*.json` problem in `dir`, sorted by id.
pub fn load_problem_dir(dir: impl AsRef<Path>) -> Result<Vec<ProblemSpec>, ProblemError> {
    let dir = dir.as_ref();
    let entries = std::fs::read_dir(dir).map_err(|source| ProblemError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| ProblemError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let path = entry.path();
        if path.extension().is_some_and(|e| e == "json") {
            paths.push(path);
        }
    }
    paths.sort();
    let mut problems = paths
        .iter()
        .map(load_problem)
        .collect::<Result<Vec<_>, _>>()?;
    problems.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(problems)
}
