use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// What a command produced: the full JSON document, the flat rows used for
/// CSV, a one-screen summary, and whether its checks passed.
pub struct Report {
    pub document: Value,
    pub rows: Vec<Map<String, Value>>,
    pub summary: String,
    pub ok: bool,
}

impl Report {
    pub fn new<T: Serialize>(document: &T, summary: String) -> Result<Self> {
        Ok(Report {
            document: serde_json::to_value(document)?,
            rows: Vec::new(),
            summary,
            ok: true,
        })
    }

    pub fn with_rows<T: Serialize>(mut self, rows: &[T]) -> Result<Self> {
        self.rows = rows
            .iter()
            .map(|r| match serde_json::to_value(r)? {
                Value::Object(m) => Ok(m),
                other => Ok(Map::from_iter([("value".to_string(), other)])),
            })
            .collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn checked(mut self, ok: bool) -> Self {
        self.ok = ok;
        self
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.document)?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => csv_bytes(&self.rows),
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<()> {
        let bytes = self.render(format)?;
        match out {
            Some(path) => {
                std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
                println!("{}", self.summary);
            }
            None => std::io::stdout().write_all(&bytes)?,
        }
        Ok(())
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn csv_bytes(rows: &[Map<String, Value>]) -> Result<Vec<u8>> {
    let mut header: Vec<&String> = Vec::new();
    for r in rows {
        for k in r.keys() {
            if !header.contains(&k) {
                header.push(k);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(header.iter().map(|k| r.get(*k).map(cell).unwrap_or_default()))?;
    }
    Ok(w.into_inner()?)
}
