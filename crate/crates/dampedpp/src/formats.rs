//! Tabular output as CSV or JSON, and JSON report writing.
//!
//! Floats are printed in the shortest decimal form that parses back to the
//! same `f64`, so identical runs produce identical bytes.

use std::path::Path;

use serde::ser::{Serialize, Serializer};

use crate::config::SCHEMA_VERSION;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
}

impl Cell {
    fn text(&self) -> String {
        match *self {
            // Debug gives the shortest round-trip form and keeps a trailing ".0"
            Cell::Num(v) => format!("{v:?}"),
            Cell::Bool(b) => b.to_string(),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Cell::Num(v) if v.is_finite() => s.serialize_f64(v),
            Cell::Num(_) => s.serialize_none(),
            Cell::Bool(b) => s.serialize_bool(b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(serde::Serialize)]
struct TableDoc<'a> {
    schema_version: u32,
    columns: &'a [&'static str],
    rows: &'a [Vec<Cell>],
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.into_inner().map_err(|e| CliError::Io(e.into_error()))
    }

    pub fn to_json(&self) -> Vec<u8> {
        let doc = TableDoc {
            schema_version: SCHEMA_VERSION,
            columns: &self.columns,
            rows: &self.rows,
        };
        let mut out = serde_json::to_vec(&doc).expect("table serializes");
        out.push(b'\n');
        out
    }

    pub fn encode(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => Ok(self.to_json()),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("reports serialize");
    out.push(b'\n');
    out
}

/// Writes to `path`, or to standard output when `path` is `None` or `-`.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    use std::io::Write;
    match path {
        Some(p) if p != Path::new("-") => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, bytes).map_err(|e| {
                CliError::Io(std::io::Error::new(
                    e.kind(),
                    format!("{}: {e}", p.display()),
                ))
            })
        }
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(vec!["t", "x", "ok"]);
        t.push(vec![Cell::Num(0.0), Cell::Num(0.1), Cell::Bool(true)]);
        t.push(vec![
            Cell::Num(1e-300),
            Cell::Num(1.0 / 3.0),
            Cell::Bool(false),
        ]);
        t
    }

    #[test]
    fn csv_text() {
        let text = String::from_utf8(sample().to_csv().unwrap()).unwrap();
        assert_eq!(
            text,
            "t,x,ok\n0.0,0.1,true\n1e-300,0.3333333333333333,false\n"
        );
    }

    #[test]
    fn json_text() {
        let v: serde_json::Value = serde_json::from_slice(&sample().to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["columns"][1], "x");
        assert_eq!(v["rows"][1][1].as_f64(), Some(1.0 / 3.0));
        assert_eq!(v["rows"][0][2], true);
    }

    proptest::proptest! {
        #[test]
        fn floats_round_trip(bits in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let text = Cell::Num(bits).text();
            proptest::prop_assert_eq!(text.parse::<f64>().unwrap().to_bits(), bits.to_bits());
        }
    }
}
