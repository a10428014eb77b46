//! NDJSON report lines: one JSON object per line, tagged by `kind`.

use crate::verify::ConditionReport;
use serde_json::{json, Map, Value};
use std::io::{self, Write};
use std::time::{SystemTime, UNIX_EPOCH};

pub struct Reporter<'w> {
    out: &'w mut dyn Write,
    timestamps: bool,
    failed: bool,
}

impl<'w> Reporter<'w> {
    pub fn new(out: &'w mut dyn Write, timestamps: bool) -> Self {
        Reporter {
            out,
            timestamps,
            failed: false,
        }
    }

    /// True once any emitted condition failed.
    pub fn failed(&self) -> bool {
        self.failed
    }

    /// Writes `{"kind": kind, ...fields}`; `fields` must be an object.
    pub fn emit(&mut self, kind: &str, fields: Value) -> io::Result<()> {
        let mut record = Map::new();
        record.insert("kind".into(), Value::from(kind));
        if let Value::Object(m) = fields {
            record.extend(m);
        }
        if self.timestamps {
            let now = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64());
            record.insert("timestamp".into(), Value::from(now));
        }
        serde_json::to_writer(&mut *self.out, &Value::Object(record))?;
        self.out.write_all(b"\n")
    }

    pub fn condition(&mut self, c: &ConditionReport) -> io::Result<()> {
        self.failed |= !c.pass;
        let mut fields = json!({
            "name": c.condition_name,
            "samples_checked": c.samples_checked,
            "samples_skipped": c.samples_skipped,
            "max_residual": residual(c.max_residual),
            "tolerance": c.tolerance,
            "worst_case": c.worst_case,
            "pass": c.pass,
        });
        if let Some(note) = &c.note {
            fields["note"] = Value::from(note.as_str());
        }
        self.emit("condition", fields)
    }

    pub fn error(&mut self, code: &str, message: impl std::fmt::Display) -> io::Result<()> {
        self.emit("error", json!({ "error": code, "message": message.to_string() }))
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// JSON has no infinity; an unbounded residual is written as the string
/// `"inf"`.
fn residual(r: f64) -> Value {
    if r.is_finite() {
        Value::from(r)
    } else {
        Value::from("inf")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_are_single_lines_with_kind_first() {
        let mut buf = Vec::new();
        let mut r = Reporter::new(&mut buf, false);
        r.emit("value", json!({"value": [1.0]})).unwrap();
        r.error("out_of_domain", "outside").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "{\"kind\":\"value\",\"value\":[1.0]}\n{\"kind\":\"error\",\"error\":\"out_of_domain\",\"message\":\"outside\"}\n"
        );
    }

    #[test]
    fn timestamps_are_optional() {
        let mut buf = Vec::new();
        Reporter::new(&mut buf, true).emit("value", json!({})).unwrap();
        let v: Value = serde_json::from_slice(&buf).unwrap();
        assert!(v["timestamp"].as_f64().unwrap() > 0.0);
    }
}
