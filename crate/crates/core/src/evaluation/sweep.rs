//! Input-noise robustness sweep.

use serde::{Deserialize, Serialize};

use super::progression::{progression_eval, EvalContext, MetricsReport};
use crate::dataprep::{CellSeries, NoiseSpec};
use crate::error::{Error, Result};
use crate::seqmodel::Forecaster;

/// Noise levels of the robustness table, as fractions of the initial value.
pub const NOISE_GRID: [f64; 6] = [0.0, 0.002, 0.004, 0.006, 0.008, 0.01];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseColumn {
    pub sigma_fraction: f64,
    pub report: MetricsReport,
}

/// One progression evaluation per noise level. Every level reuses the same
/// seed, so all columns share one set of standard-normal draws.
pub fn noise_sweep(
    model: &dyn Forecaster,
    cells: &[CellSeries],
    ctx: &EvalContext,
    grid: &[f64],
    seed: u64,
) -> Result<Vec<NoiseColumn>> {
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    grid.iter()
        .map(|&sigma| {
            let noise = NoiseSpec::new(sigma, seed)?;
            let ctx = EvalContext {
                noise: Some(noise),
                ..ctx.clone()
            };
            Ok(NoiseColumn {
                sigma_fraction: sigma,
                report: progression_eval(model, cells, &ctx)?,
            })
        })
        .collect()
}
