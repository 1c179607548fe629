use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::args::Format;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Column-oriented result with document-level metadata.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    pub meta: BTreeMap<String, Value>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), ..Self::default() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.meta.insert(key.to_owned(), value.into());
    }
}

/// Finite floats become numbers, everything else null.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(manifest: &RunManifest, table: &Table, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => render_csv(manifest, table),
        Format::Json => render_json(manifest, table),
    }
}

fn render_csv(manifest: &RunManifest, table: &Table) -> Vec<u8> {
    let mut buf = Vec::new();
    for line in manifest.comment_lines() {
        writeln!(buf, "{line}").expect("write to Vec");
    }
    for (k, v) in &table.meta {
        writeln!(buf, "# {k}: {v}").expect("write to Vec");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(buf);
    w.write_record(&table.columns).expect("write to Vec");
    for row in &table.rows {
        w.write_record(row.iter().map(cell)).expect("write to Vec");
    }
    w.into_inner().expect("flush to Vec")
}

fn render_json(manifest: &RunManifest, table: &Table) -> Vec<u8> {
    let mut doc = Map::new();
    doc.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    for (k, v) in &table.meta {
        doc.insert(k.clone(), v.clone());
    }
    let rows = table
        .rows
        .iter()
        .map(|r| Value::Object(table.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
        .collect();
    doc.insert("rows".into(), Value::Array(rows));
    let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).expect("json serializes");
    out.push(b'\n');
    out
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_owned(), source }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> (RunManifest, Table) {
        let mut m = RunManifest::new("test");
        m.set("seed", 1);
        let mut t = Table::new(&["x", "status"]);
        t.push(vec![num(0.5), json!("ok")]);
        t.push(vec![num(f64::NAN), json!("fallback: a, b")]);
        t.meta("dof", 20.0);
        (m, t)
    }

    #[test]
    fn csv_layout() {
        let (m, t) = sample();
        let s = String::from_utf8(render(&m, &t, Format::Csv)).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[..5].iter().all(|l| l.starts_with('#')));
        assert_eq!(lines[4], "# dof: 20.0");
        assert_eq!(lines[5], "x,status");
        assert_eq!(lines[6], "0.5,ok");
        assert_eq!(lines[7], ",\"fallback: a, b\"");
    }

    #[test]
    fn json_layout() {
        let (m, t) = sample();
        let v: Value = serde_json::from_slice(&render(&m, &t, Format::Json)).unwrap();
        assert_eq!(v["manifest"]["command"], "test");
        assert_eq!(v["dof"], 20.0);
        assert_eq!(v["rows"][0]["x"], 0.5);
        assert!(v["rows"][1]["x"].is_null());
    }
}
