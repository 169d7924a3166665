//! Output documents and their text / JSON / CSV renderings.

use serde::Serialize;
use serde_json::Value;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub tool: String,
    pub precision: String,
}

/// What was run and with which inputs. Embedded in every output.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, String>,
    pub versions: Versions,
    pub seed: u64,
    pub timestamp: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Doc {
    pub manifest: RunManifest,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<Value>,
    /// the table already lists the checks; don't repeat them in text
    #[serde(skip)]
    pub checks_in_table: bool,
}

impl Doc {
    pub fn new(manifest: RunManifest, columns: &[&str]) -> Self {
        Doc {
            manifest,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            checks: Vec::new(),
            breakdown: None,
            checks_in_table: false,
        }
    }

    pub fn row(&mut self, cells: Vec<Value>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    pub fn check(&mut self, name: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("document serializes");
                s.push('\n');
                s
            }
            Format::Csv => csv_table(&self.manifest, &self.columns, &self.rows),
            Format::Text => self.text(),
        }
    }

    fn text(&self) -> String {
        let m = &self.manifest;
        let mut out = String::new();
        let params: Vec<String> = m.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(out, "# ms-lab {}  {}", m.command, params.join(" "));
        let _ = writeln!(out, "# {} precision={} seed={} {}", m.versions.tool, m.versions.precision, m.seed, m.timestamp);
        if !self.rows.is_empty() {
            let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(cell_text).collect()).collect();
            let widths: Vec<usize> = (0..self.columns.len())
                .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
                .collect();
            let line = |items: &[String]| -> String {
                items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string()
            };
            let _ = writeln!(out, "{}", line(&self.columns));
            for r in &cells {
                let _ = writeln!(out, "{}", line(r));
            }
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k}: {}", cell_text(v));
        }
        for c in self.checks.iter().filter(|_| !self.checks_in_table) {
            let _ = writeln!(out, "{} {}  {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        out
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// RFC-4180 table. The first record is `#manifest,<json>` so that readers
/// that skip `#` lines see a plain header + rows.
pub fn csv_table(manifest: &RunManifest, columns: &[String], rows: &[Vec<Value>]) -> String {
    let mut w = csv::WriterBuilder::new().flexible(true).terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let m = serde_json::to_string(manifest).expect("manifest serializes");
    w.write_record(["#manifest", m.as_str()]).expect("in-memory write");
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r.iter().map(cell_text)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf8")
}

pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}
