use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};
use stoqlab_core::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Accept,
    Reject,
    Violation,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ok => "ok",
            Verdict::Accept => "accept",
            Verdict::Reject => "reject",
            Verdict::Violation => "violation",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Ok | Verdict::Accept => 0,
            Verdict::Reject | Verdict::Violation => 1,
        }
    }
}

pub struct Report {
    pub command: &'static str,
    pub verdict: Verdict,
    pub result: Value,
    /// Explicit CSV table; otherwise `result` is flattened to key/value rows.
    pub table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
}

impl Report {
    pub fn new(command: &'static str, verdict: Verdict, result: Value) -> Self {
        Self { command, verdict, result, table: None }
    }

    pub fn with_table(mut self, header: Vec<&'static str>, rows: Vec<Vec<String>>) -> Self {
        self.table = Some((header, rows));
        self
    }

    pub fn to_json(&self, seed: Option<u64>, mode: &str) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "verdict": self.verdict.as_str(),
            "seed": seed,
            "mode": mode,
            "result": self.result,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        match &self.table {
            Some((header, rows)) => {
                w.write_record(header)?;
                for r in rows {
                    w.write_record(r)?;
                }
            }
            None => {
                w.write_record(["key", "value"])?;
                let mut rows = Vec::new();
                flatten("", &self.result, &mut rows);
                for (k, v) in rows {
                    w.write_record([k, v])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

pub fn emit(json: &Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(json)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}
