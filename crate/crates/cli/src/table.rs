//! Trajectory tables and their two on-disk formats.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so a table read back from disk reproduces every value.

use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::JsonLines => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json-lines" | "jsonl" => Ok(Format::JsonLines),
            other => Err(format!("unknown format `{other}` (expected csv or json-lines)")),
        }
    }
}

/// Column names plus rows; `None` is an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

fn number(v: f64) -> String {
    format!("{v:?}")
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::JsonLines => self.to_json_lines(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.map(number).unwrap_or_default()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// One JSON object per row. Empty cells and non-finite values become
    /// `null`.
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for row in &self.rows {
            let obj: Map<String, Value> = self
                .header
                .iter()
                .zip(row)
                .map(|(k, v)| (k.clone(), v.and_then(Number::from_f64).map_or(Value::Null, Value::Number)))
                .collect();
            let _ = writeln!(s, "{}", Value::Object(obj));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Table, String> {
        let mut lines = text.lines();
        let header: Vec<String> = lines.next().ok_or("empty file")?.split(',').map(str::to_string).collect();
        let mut table = Table::new(header);
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some) })
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("row {}: {e}", i + 1))?;
            if row.len() != table.header.len() {
                return Err(format!("row {}: expected {} cells, got {}", i + 1, table.header.len(), row.len()));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![Some(0.1 + 0.2), Some(-1e-300)]);
        t.push(vec![Some(std::f64::consts::PI), None]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn json_lines_shape() {
        let mut t = Table::new(vec!["n".into(), "x1".into()]);
        t.push(vec![Some(0.0), Some(1.5)]);
        t.push(vec![Some(1.0), None]);
        assert_eq!(t.to_json_lines(), "{\"n\":0.0,\"x1\":1.5}\n{\"n\":1.0,\"x1\":null}\n");
    }
}
