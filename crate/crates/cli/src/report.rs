//! Serialization of reports and tables.

use serde_json::{Map, Value};

use crate::config::Format;
use crate::CliError;

/// Flattens nested JSON into `(dotted.key, value)` pairs in document order.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let key = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, v)| walk(&key(k), v, out)),
            Value::Array(a) => a
                .iter()
                .enumerate()
                .for_each(|(i, v)| walk(&key(&i.to_string()), v, out)),
            Value::String(s) => out.push((prefix.to_string(), s.clone())),
            Value::Null => out.push((prefix.to_string(), String::new())),
            other => out.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

/// A certificate-style report as JSON or `key,value` CSV.
pub fn render_record(v: &Value, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(v)? + "\n"),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"])?;
            for (k, val) in flatten(v) {
                w.write_record([k, val])?;
            }
            finish(w)
        }
    }
}

/// A table with a header, as JSON `{config, rows}` or plain CSV rows.
pub fn render_table(config: &Value, header: &[&str], rows: &[Vec<Value>], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let records: Vec<Value> = rows
                .iter()
                .map(|r| {
                    Value::Object(
                        header
                            .iter()
                            .map(|h| h.to_string())
                            .zip(r.iter().cloned())
                            .collect::<Map<_, _>>(),
                    )
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("config".into(), config.clone());
            doc.insert("rows".into(), Value::Array(records));
            Ok(serde_json::to_string_pretty(&Value::Object(doc))? + "\n")
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(header)?;
            for r in rows {
                w.write_record(r.iter().map(cell))?;
            }
            finish(w)
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
