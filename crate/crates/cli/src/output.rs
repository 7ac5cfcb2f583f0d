//! Result tables and their CSV/JSON serializations.
//!
//! CSV files start with `# key: value` metadata lines, followed by a header
//! row and the data rows. Reals are written with 17 significant digits and
//! non-finite values as `nan`. JSON files hold one object with `metadata`
//! and `rows`, keys in column order.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Text(String),
}

impl Value {
    /// Same value, comparing reals by bit pattern (all NaNs equal).
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Real(a), Value::Real(b)) => (a.is_nan() && b.is_nan()) || a.to_bits() == b.to_bits(),
            _ => self == other,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Real(x) => Some(x),
            Value::Int(i) => Some(i as f64),
            Value::Text(_) => None,
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Real(x) => Number::from_f64(*x).map_or_else(|| Json::from("nan"), Json::Number),
            Value::Int(i) => Json::from(*i),
            Value::Text(s) => Json::from(s.as_str()),
        }
    }

    fn from_json(v: &Json) -> Result<Value, OutputError> {
        match v {
            Json::Number(n) if n.is_i64() => Ok(Value::Int(n.as_i64().unwrap_or_default())),
            Json::Number(n) => Ok(Value::Real(n.as_f64().unwrap_or(f64::NAN))),
            Json::String(s) if s == "nan" => Ok(Value::Real(f64::NAN)),
            Json::String(s) => Ok(Value::Text(s.clone())),
            other => Err(OutputError::Parse(format!("unexpected JSON value {other}"))),
        }
    }

    /// Inverse of the CSV cell format: integers, then reals, then text.
    pub fn parse_cell(s: &str) -> Value {
        if s == "nan" {
            return Value::Real(f64::NAN);
        }
        if let Ok(i) = s.parse::<i64>() {
            return Value::Int(i);
        }
        if s.contains(['e', '.']) {
            if let Ok(x) = s.parse::<f64>() {
                return Value::Real(x);
            }
        }
        Value::Text(s.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(x) if x.is_finite() => write!(f, "{x:.16e}"),
            Value::Real(_) => f.write_str("nan"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<u64> for Value {
    fn from(x: u64) -> Self {
        Value::Int(i64::try_from(x).unwrap_or(i64::MAX))
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::from(x as u64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Int(x as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// Ordered key/value header of an output file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, Value)>,
}

impl Metadata {
    pub fn push(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width differs from header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Same columns and bit-identical values.
    pub fn same(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same(y)))
    }

    fn check(&self) -> Result<(), OutputError> {
        match self.rows.iter().position(|r| r.len() != self.columns.len()) {
            Some(i) => Err(OutputError::Shape(format!(
                "row {i} has {} values for {} columns",
                self.rows[i].len(),
                self.columns.len()
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("inconsistent table: {0}")]
    Shape(String),
    #[error("cannot parse output: {0}")]
    Parse(String),
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn render(table: &Table, meta: &Metadata, format: Format) -> Result<String, OutputError> {
    table.check()?;
    match format {
        Format::Csv => render_csv(table, meta),
        Format::Json => Ok(render_json(table, meta)),
    }
}

fn render_csv(table: &Table, meta: &Metadata) -> Result<String, OutputError> {
    let mut out = String::new();
    for (k, v) in &meta.entries {
        let text = v.to_string().replace(['\n', '\r'], " ");
        out.push_str(&format!("# {k}: {text}\n"));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| OutputError::Shape(e.to_string());
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| OutputError::Shape(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| OutputError::Shape(e.to_string()))?);
    Ok(out)
}

fn render_json(table: &Table, meta: &Metadata) -> String {
    let metadata: Map<String, Json> = meta.entries.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
    let rows: Vec<Json> = table
        .rows
        .iter()
        .map(|r| Json::Object(table.columns.iter().cloned().zip(r.iter().map(Value::to_json)).collect()))
        .collect();
    let mut doc = Map::new();
    doc.insert("metadata".into(), Json::Object(metadata));
    doc.insert("columns".into(), Json::from(table.columns.clone()));
    doc.insert("rows".into(), Json::Array(rows));
    let mut s = serde_json::to_string_pretty(&Json::Object(doc)).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Write a table to `path`, or to stdout when `path` is `None`.
pub fn emit(table: &Table, meta: &Metadata, format: Format, path: Option<&Path>) -> Result<(), OutputError> {
    let text = render(table, meta, format)?;
    match path {
        Some(p) => fs::write(p, text).map_err(|source| OutputError::Io { path: p.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn parse(text: &str, format: Format) -> Result<(Metadata, Table), OutputError> {
    match format {
        Format::Csv => parse_csv(text),
        Format::Json => parse_json(text),
    }
}

pub fn parse_csv(text: &str) -> Result<(Metadata, Table), OutputError> {
    let mut meta = Metadata::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        let body = line.trim_start_matches('#').trim_start();
        let (k, v) = body
            .split_once(": ")
            .ok_or_else(|| OutputError::Parse(format!("bad metadata line {line:?}")))?;
        meta.push(k, Value::parse_cell(v));
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| OutputError::Parse(e.to_string());
    let columns: Vec<String> = r.headers().map_err(parse_err)?.iter().map(str::to_string).collect();
    let mut table = Table { columns, rows: Vec::new() };
    for rec in r.records() {
        table.rows.push(rec.map_err(parse_err)?.iter().map(Value::parse_cell).collect());
    }
    Ok((meta, table))
}

pub fn parse_json(text: &str) -> Result<(Metadata, Table), OutputError> {
    let doc: Json = serde_json::from_str(text).map_err(|e| OutputError::Parse(e.to_string()))?;
    let missing = |k: &str| OutputError::Parse(format!("missing `{k}`"));
    let mut meta = Metadata::default();
    for (k, v) in doc.get("metadata").and_then(Json::as_object).ok_or_else(|| missing("metadata"))? {
        meta.push(k.clone(), Value::from_json(v)?);
    }
    let columns: Vec<String> = doc
        .get("columns")
        .and_then(Json::as_array)
        .ok_or_else(|| missing("columns"))?
        .iter()
        .map(|c| c.as_str().map(str::to_string).ok_or_else(|| missing("column name")))
        .collect::<Result<_, _>>()?;
    let mut table = Table { columns, rows: Vec::new() };
    for row in doc.get("rows").and_then(Json::as_array).ok_or_else(|| missing("rows"))? {
        let obj = row.as_object().ok_or_else(|| missing("row object"))?;
        let values = table
            .columns
            .iter()
            .map(|c| obj.get(c).ok_or_else(|| missing(c)).and_then(Value::from_json))
            .collect::<Result<_, _>>()?;
        table.rows.push(values);
    }
    Ok((meta, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, f64::MIN_POSITIVE, 1.25, -0.0] {
            let s = Value::Real(x).to_string();
            assert!(Value::parse_cell(&s).same(&Value::Real(x)), "{s}");
        }
        assert_eq!(Value::Real(f64::INFINITY).to_string(), "nan");
        assert_eq!(Value::parse_cell("42"), Value::Int(42));
        assert_eq!(Value::parse_cell("abc"), Value::Text("abc".into()));
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = Value::Real(0.1).to_string();
        let mantissa = s.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = Table::new(["a", "b"]);
        t.rows.push(vec![Value::Int(1)]);
        assert!(matches!(render(&t, &Metadata::default(), Format::Csv), Err(OutputError::Shape(_))));
    }
}
