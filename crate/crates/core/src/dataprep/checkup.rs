//! Checkup CSV ingestion.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKUP_HEADER: [&str; 4] = ["cell_id", "cycle", "capacity_ah", "resistance_mohm"];

/// One characterization measurement of one cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckupRecord {
    pub cell_id: String,
    pub cycle: usize,
    /// Ah.
    pub capacity: f64,
    /// mΩ.
    pub resistance: f64,
}

pub fn load_checkups(path: impl AsRef<Path>) -> Result<Vec<CheckupRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_checkups(file, &path.display().to_string())
}

/// Parses checkup CSV text. `source` names the input in error messages; row
/// numbers are 1-based file lines.
pub fn parse_checkups(reader: impl Read, source: &str) -> Result<Vec<CheckupRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let data_err = |row: usize, message: String| Error::Data {
        path: source.to_string(),
        row,
        message,
    };
    let headers = rdr
        .headers()
        .map_err(|e| data_err(1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != CHECKUP_HEADER {
        return Err(data_err(
            1,
            format!("expected header `{}`", CHECKUP_HEADER.join(",")),
        ));
    }

    let mut records = Vec::new();
    let mut last_cycle: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| data_err(line, e.to_string()))?;
        if row.len() != 4 {
            return Err(data_err(
                line,
                format!("expected 4 fields, found {}", row.len()),
            ));
        }
        let cell_id = row[0].trim().to_string();
        if cell_id.is_empty() {
            return Err(data_err(line, "empty cell_id".into()));
        }
        let cycle: usize = row[1].trim().parse().map_err(|_| {
            data_err(
                line,
                format!("cycle `{}` is not a non-negative integer", &row[1]),
            )
        })?;
        let parse_pos = |field: &str, name: &str| -> Result<f64> {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| data_err(line, format!("{name} `{field}` is not a number")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(data_err(line, format!("{name} must be positive, got {v}")));
            }
            Ok(v)
        };
        let capacity = parse_pos(&row[2], "capacity_ah")?;
        let resistance = parse_pos(&row[3], "resistance_mohm")?;
        if let Some(&(prev, prev_line)) = last_cycle.get(&cell_id) {
            if cycle == prev {
                return Err(data_err(
                    line,
                    format!(
                        "cell {cell_id}: duplicate cycle {cycle} (first seen on row {prev_line})"
                    ),
                ));
            }
            if cycle < prev {
                return Err(data_err(
                    line,
                    format!(
                        "cell {cell_id}: cycle {cycle} after cycle {prev}; cycles must increase"
                    ),
                ));
            }
        }
        last_cycle.insert(cell_id.clone(), (cycle, line));
        records.push(CheckupRecord {
            cell_id,
            cycle,
            capacity,
            resistance,
        });
    }
    records.sort_by(|a, b| a.cell_id.cmp(&b.cell_id).then(a.cycle.cmp(&b.cycle)));
    Ok(records)
}

/// Splits sorted records into per-cell groups, ordered by cell id.
pub fn group_by_cell(records: &[CheckupRecord]) -> Vec<(String, Vec<CheckupRecord>)> {
    let mut groups: BTreeMap<String, Vec<CheckupRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.cell_id.clone()).or_default().push(r.clone());
    }
    groups.into_iter().collect()
}

pub fn write_checkups(mut out: impl Write, records: &[CheckupRecord]) -> std::io::Result<()> {
    writeln!(out, "{}", CHECKUP_HEADER.join(","))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.cell_id, r.cycle, r.capacity, r.resistance
        )?;
    }
    Ok(())
}
