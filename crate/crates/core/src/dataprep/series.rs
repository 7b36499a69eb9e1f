//! Per-cycle cell series and their CSV cache.

use std::io::{Read, Write};
use std::path::Path;

use super::checkup::CheckupRecord;
use super::normalize::{Normalizer, Q_NOMINAL_AH};
use super::pchip::Pchip;
use crate::error::{Error, Result};
use crate::seqmodel::Channel;

pub const SERIES_HEADER: [&str; 3] = ["cycle", "capacity_ah", "resistance_mohm"];

/// Capacity (Ah) and resistance (mΩ) at every cycle `0..=last_cycle()`.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSeries {
    pub cell_id: String,
    pub capacity: Vec<f64>,
    pub resistance: Vec<f64>,
}

/// A cell's series divided by the fleet normalizer.
#[derive(Clone, Debug, PartialEq)]
pub struct SohSeries {
    pub cell_id: String,
    pub soh_c: Vec<f64>,
    pub soh_r: Vec<f64>,
}

impl SohSeries {
    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Capacity => &self.soh_c,
            Channel::Resistance => &self.soh_r,
        }
    }
}

impl CellSeries {
    pub fn new(
        cell_id: impl Into<String>,
        capacity: Vec<f64>,
        resistance: Vec<f64>,
    ) -> Result<Self> {
        let cell_id = cell_id.into();
        let cell_err = |message: String| Error::Cell {
            cell_id: cell_id.clone(),
            message,
        };
        if capacity.len() != resistance.len() {
            return Err(cell_err(format!(
                "capacity has {} cycles but resistance has {}",
                capacity.len(),
                resistance.len()
            )));
        }
        if capacity.is_empty() {
            return Err(cell_err("empty series".into()));
        }
        if let Some(i) = capacity
            .iter()
            .chain(&resistance)
            .position(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(cell_err(format!(
                "non-positive or non-finite value at index {i}"
            )));
        }
        let q0 = capacity[0];
        if (q0 - Q_NOMINAL_AH).abs() > 0.2 * Q_NOMINAL_AH {
            return Err(cell_err(format!(
                "initial capacity {q0} Ah is more than 20% away from nominal {Q_NOMINAL_AH} Ah"
            )));
        }
        Ok(Self {
            cell_id,
            capacity,
            resistance,
        })
    }

    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    pub fn last_cycle(&self) -> usize {
        self.capacity.len() - 1
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Capacity => &self.capacity,
            Channel::Resistance => &self.resistance,
        }
    }

    pub fn channel_mut(&mut self, channel: Channel) -> &mut Vec<f64> {
        match channel {
            Channel::Capacity => &mut self.capacity,
            Channel::Resistance => &mut self.resistance,
        }
    }

    pub fn normalize(&self, normalizer: &Normalizer) -> SohSeries {
        SohSeries {
            cell_id: self.cell_id.clone(),
            soh_c: normalizer.normalize(Channel::Capacity, &self.capacity),
            soh_r: normalizer.normalize(Channel::Resistance, &self.resistance),
        }
    }

    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", SERIES_HEADER.join(","))?;
        for (c, (q, r)) in self.capacity.iter().zip(&self.resistance).enumerate() {
            writeln!(out, "{c},{q},{r}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    /// Reads a series cache; cycles must be exactly `0, 1, 2, ...`.
    pub fn read_csv(cell_id: &str, reader: impl Read, source: &str) -> Result<Self> {
        let data_err = |row: usize, message: String| Error::Data {
            path: source.to_string(),
            row,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| data_err(1, e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != SERIES_HEADER {
            return Err(data_err(
                1,
                format!("expected header `{}`", SERIES_HEADER.join(",")),
            ));
        }
        let mut capacity = Vec::new();
        let mut resistance = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| data_err(line, e.to_string()))?;
            let num = |k: usize| -> Result<f64> {
                row.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| data_err(line, format!("bad field {k}")))
            };
            let cycle = num(0)?;
            if cycle != i as f64 {
                return Err(data_err(line, format!("expected cycle {i}, found {cycle}")));
            }
            capacity.push(num(1)?);
            resistance.push(num(2)?);
        }
        Self::new(cell_id, capacity, resistance)
    }

    pub fn load(cell_id: &str, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(cell_id, file, &path.display().to_string())
    }
}

/// Dense per-cycle series from one cell's checkups. The first checkup must be
/// at cycle 0; the series ends at the last checkup.
pub fn interpolate_pchip(checkups: &[CheckupRecord]) -> Result<CellSeries> {
    let cell_id = checkups
        .first()
        .map(|r| r.cell_id.clone())
        .ok_or(Error::EmptyInput)?;
    let cell_err = |message: String| Error::Cell {
        cell_id: cell_id.clone(),
        message,
    };
    if checkups.iter().any(|r| r.cell_id != cell_id) {
        return Err(cell_err("checkups from more than one cell".into()));
    }
    if checkups.len() < 3 {
        return Err(cell_err(format!(
            "PCHIP needs at least 3 checkups, got {}",
            checkups.len()
        )));
    }
    if checkups[0].cycle != 0 {
        return Err(cell_err(format!(
            "first checkup is at cycle {}, expected 0",
            checkups[0].cycle
        )));
    }
    let x: Vec<f64> = checkups.iter().map(|r| r.cycle as f64).collect();
    let q: Vec<f64> = checkups.iter().map(|r| r.capacity).collect();
    let r: Vec<f64> = checkups.iter().map(|r| r.resistance).collect();
    let wrap = |e: Error| cell_err(e.to_string());
    let capacity = Pchip::new(&x, &q).map_err(wrap)?.eval_integers();
    let resistance = Pchip::new(&x, &r).map_err(wrap)?.eval_integers();
    CellSeries::new(cell_id.clone(), capacity, resistance)
}
