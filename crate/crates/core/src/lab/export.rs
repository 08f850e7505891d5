use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A single CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            Value::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            // shortest representation that round-trips
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<u32> for Value {
    fn from(i: u32) -> Self {
        Value::Int(i64::from(i))
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// Rows of named columns plus free-form comment lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub comments: Vec<String>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            comments: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get<'a>(&self, row: &'a [Value], name: &str) -> Option<&'a Value> {
        self.column(name).and_then(|i| row.get(i))
    }

    /// Numeric cell; panics on a missing column or a text cell.
    pub fn num(&self, row: &[Value], name: &str) -> f64 {
        self.get(row, name)
            .and_then(Value::as_f64)
            .unwrap_or_else(|| panic!("no numeric column '{name}'"))
    }

    /// Text cell; panics on a missing column or a numeric cell.
    pub fn text<'a>(&self, row: &'a [Value], name: &str) -> &'a str {
        self.get(row, name)
            .and_then(Value::as_str)
            .unwrap_or_else(|| panic!("no text column '{name}'"))
    }

    /// Header, then comment lines, then data rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = out;
        let mut w = csv::WriterBuilder::new().from_writer(&mut out);
        w.write_record(&self.columns)?;
        w.flush().map_err(stream_error)?;
        drop(w);
        for c in &self.comments {
            writeln!(out, "# {c}").map_err(stream_error)?;
        }
        let mut w = csv::WriterBuilder::new().from_writer(&mut out);
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(stream_error)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV output is UTF-8")
    }
}

fn stream_error(source: std::io::Error) -> Error {
    Error::Io {
        path: "<stream>".into(),
        source,
    }
}

/// Write `table` as CSV to `path`.
pub fn export_results(table: &ResultTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    table.write_csv(&mut out).map_err(|e| match e {
        Error::Io { source, .. } => io_err(source),
        other => other,
    })?;
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_comments_rows() {
        let mut t = ResultTable::new(&["a", "b"]);
        t.comment("seed = 3");
        t.push(vec![1usize.into(), 0.5.into()]);
        t.push(vec![2usize.into(), "x,y".into()]);
        assert_eq!(t.to_csv_string(), "a,b\n# seed = 3\n1,0.5\n2,\"x,y\"\n");
        assert_eq!(t.num(&t.rows[0], "b"), 0.5);
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(&["n_t", "m"]);
        assert_eq!(t.to_csv_string(), "n_t,m\n");
    }

    #[test]
    fn export_reports_path() {
        let t = ResultTable::new(&["x"]);
        let err = export_results(&t, "/nonexistent-dir/out.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        assert_eq!(Value::Float(x).to_string().parse::<f64>().unwrap(), x);
    }
}
