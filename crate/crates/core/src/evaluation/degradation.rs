//! Per-cell degradation metrics and their pairwise correlations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{eol_cycle, pearson, Direction, EolThresholds};
use crate::dataprep::{CellSeries, Normalizer};
use crate::error::Result;
use crate::kneepoint::{knee_offline, Curve, SmoothingSpec};
use crate::seqmodel::Channel;

pub const METRIC_NAMES: [&str; 8] = [
    "CapKneeX", "CapKneeY", "ResKneeX", "ResKneeY", "EOL80", "EOL65", "EOL120", "EOL130",
];

/// Knee cycles and values (Ah, mΩ) and the four end-of-life cycles of one
/// cell; `None` where the event is absent from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub cell_id: String,
    pub values: [Option<f64>; 8],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationTable {
    pub cells: Vec<CellMetrics>,
    /// Pairwise Pearson coefficients over cells where both metrics exist;
    /// `None` entries are undefined. The whole matrix is `None` for fewer
    /// than two cells.
    pub rho: Option<Vec<Vec<Option<f64>>>>,
}

pub fn cell_metrics(
    cell: &CellSeries,
    normalizer: &Normalizer,
    thresholds: &EolThresholds,
) -> CellMetrics {
    let spec = SmoothingSpec::for_step(1.0);
    let knee = |ch: Channel| knee_offline(Curve::per_cycle(cell.channel(ch)), spec).ok();
    let ck = knee(Channel::Capacity);
    let rk = knee(Channel::Resistance);
    let q = Curve::per_cycle(&cell.capacity);
    let r = Curve::per_cycle(&cell.resistance);
    let (qb, rb) = (normalizer.q_nominal, normalizer.r_base);
    CellMetrics {
        cell_id: cell.cell_id.clone(),
        values: [
            ck.map(|k| k.knee_cycle),
            ck.map(|k| k.knee_value),
            rk.map(|k| k.knee_cycle),
            rk.map(|k| k.knee_value),
            eol_cycle(q, thresholds.cap_first, qb, Direction::Falling),
            eol_cycle(q, thresholds.cap_second, qb, Direction::Falling),
            eol_cycle(r, thresholds.res_first, rb, Direction::Rising),
            eol_cycle(r, thresholds.res_second, rb, Direction::Rising),
        ],
    }
}

pub fn degradation_metrics(
    cells: &[CellSeries],
    normalizer: &Normalizer,
    thresholds: &EolThresholds,
) -> Result<DegradationTable> {
    thresholds.validate()?;
    let rows: Vec<CellMetrics> = cells
        .iter()
        .map(|c| cell_metrics(c, normalizer, thresholds))
        .collect();
    let rho = (rows.len() >= 2).then(|| {
        (0..8)
            .map(|i| {
                (0..8)
                    .map(|j| {
                        let (x, y): (Vec<f64>, Vec<f64>) = rows
                            .iter()
                            .filter_map(|r| Some((r.values[i]?, r.values[j]?)))
                            .unzip();
                        pearson(&x, &y).ok()
                    })
                    .collect()
            })
            .collect()
    });
    Ok(DegradationTable { cells: rows, rho })
}

impl DegradationTable {
    pub fn write_cells_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "cell_id,{}", METRIC_NAMES.join(","))?;
        for c in &self.cells {
            let vals: Vec<String> = c
                .values
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            writeln!(out, "{},{}", c.cell_id, vals.join(","))?;
        }
        Ok(())
    }

    /// Correlation matrix CSV; a single comment line when undefined.
    pub fn write_rho_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        let Some(rho) = &self.rho else {
            return writeln!(
                out,
                "# correlation matrix undefined for fewer than two cells"
            );
        };
        writeln!(out, "metric,{}", METRIC_NAMES.join(","))?;
        for (name, row) in METRIC_NAMES.iter().zip(rho) {
            let vals: Vec<String> = row
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default())
                .collect();
            writeln!(out, "{name},{}", vals.join(","))?;
        }
        Ok(())
    }
}
