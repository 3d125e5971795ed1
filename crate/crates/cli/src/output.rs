//! Tables with a provenance header, written as CSV or JSON.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Str(String),
    Bool(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

/// 17 significant digits, fixed notation for moderate exponents (like %.17g).
pub fn fmt17(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let e = v.abs().log10().floor() as i32;
    let s = if (-5..17).contains(&e) {
        format!("{:.*}", (16 - e).max(0) as usize, v)
    } else {
        return format!("{v:.16e}");
    };
    // trim trailing zeros of the fraction, as %g does
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => fmt17(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Str(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) if v.is_finite() => json!(v),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(v) => json!(v),
            Cell::Str(s) => json!(s),
            Cell::Bool(b) => json!(b),
        }
    }
}

/// Ordered key/value provenance, one `# <section> k=v ...` line each.
#[derive(Clone, Debug, Default)]
pub struct Header {
    pub sections: Vec<(String, Vec<(String, String)>)>,
}

impl Header {
    pub fn new(command: &str) -> Self {
        let mut h = Header::default();
        h.push("arabi", vec![("version", env!("CARGO_PKG_VERSION").to_string()), ("command", command.to_string())]);
        h
    }

    pub fn push(&mut self, section: &str, kv: Vec<(&str, String)>) {
        self.sections.push((section.to_string(), kv.into_iter().map(|(k, v)| (k.to_string(), v)).collect()));
    }

    fn lines(&self) -> Vec<String> {
        self.sections
            .iter()
            .map(|(s, kv)| {
                let body: Vec<String> = kv.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("# {s} {}", body.join(" "))
            })
            .collect()
    }

    fn json(&self) -> Value {
        let mut m = Map::new();
        for (s, kv) in &self.sections {
            let inner: Map<String, Value> = kv.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            m.insert(s.clone(), Value::Object(inner));
        }
        Value::Object(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub struct Table {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra top-level JSON members (CSV ignores them).
    pub extra: Map<String, Value>,
}

impl Table {
    pub fn new(header: Header, columns: &[&str]) -> Self {
        Table { header, columns: columns.iter().map(|s| s.to_string()).collect(), rows: vec![], extra: Map::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut w: W, format: Format) -> io::Result<()> {
        match format {
            Format::Csv => {
                for l in self.header.lines() {
                    writeln!(w, "{l}")?;
                }
                writeln!(w, "{}", self.columns.join(","))?;
                for r in &self.rows {
                    let cells: Vec<String> = r.iter().map(Cell::csv).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                    .collect();
                let mut top = Map::new();
                top.insert("meta".into(), self.header.json());
                for (k, v) in &self.extra {
                    top.insert(k.clone(), v.clone());
                }
                top.insert("rows".into(), Value::Array(rows));
                serde_json::to_writer_pretty(&mut w, &Value::Object(top))?;
                writeln!(w)?;
            }
        }
        w.flush()
    }
}

/// The single output sink: a file when `path` is given, stdout otherwise.
pub fn emit(table: &Table, path: Option<&Path>, format: Format) -> io::Result<()> {
    match path {
        Some(p) => table.write(BufWriter::new(File::create(p)?), format),
        None => table.write(io::stdout().lock(), format),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [1.0327955589886444, -2.0 / 3.0, 1e-9, 123456.789, 6.02e23, -0.0, 0.1, 1e-300] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{v} -> {s}");
        }
        assert_eq!(fmt17(-2.0 / 3.0), "-0.66666666666666663");
        assert_eq!(fmt17(0.5), "0.5");
        assert_eq!(fmt17(f64::NAN), "nan");
    }
}
