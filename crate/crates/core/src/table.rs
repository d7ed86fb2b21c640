//! Reading `id,pvalue` tables.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::pvalues::PValueVector;

/// Parses a table with header `id,pvalue`. Fields are trimmed and blank lines
/// skipped. Errors name the offending line.
pub fn parse_table(text: &str) -> Result<PValueVector> {
    let bad = |line: u64, message: String| Error::Table { line, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(bad(1, "empty input; expected header `id,pvalue`".into())),
        Some(r) => r.map_err(|e| bad(1, e.to_string()))?,
    };
    let header_line = header.position().map_or(1, |p| p.line());
    if header.len() != 2 || &header[0] != "id" || &header[1] != "pvalue" {
        let got: Vec<&str> = header.iter().collect();
        return Err(bad(header_line, format!("expected header `id,pvalue`, found `{}`", got.join(","))));
    }
    let mut rows: Vec<(String, f64)> = Vec::new();
    let mut seen = HashMap::new();
    for rec in records {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 2 {
            return Err(bad(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(bad(line, "empty id".into()));
        }
        let p: f64 = rec[1].parse().map_err(|_| bad(line, format!("pvalue `{}` is not a number", &rec[1])))?;
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(bad(line, format!("pvalue {} is outside [0, 1]", &rec[1])));
        }
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(bad(line, format!("duplicate id `{id}` (first seen on line {first})")));
        }
        rows.push((id, p));
    }
    if rows.is_empty() {
        return Err(bad(header_line, "no data rows".into()));
    }
    PValueVector::new(rows)
}
