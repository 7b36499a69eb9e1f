//! Multi-task versus single-task comparison and prediction timing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{mean, median};
use super::progression::MetricsReport;
use crate::error::{Error, Result};
use crate::seqmodel::Channel;

/// Per-prediction wall time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub repetitions: usize,
    pub mean_seconds: f64,
    pub median_seconds: f64,
}

/// Times `f` on each input in turn, cycling through `inputs` for `reps`
/// measured calls after `warmup` unmeasured ones.
pub fn time_calls<T>(
    inputs: &[T],
    warmup: usize,
    reps: usize,
    mut f: impl FnMut(&T) -> Result<()>,
) -> Result<TimingStats> {
    if inputs.is_empty() || reps == 0 {
        return Err(Error::EmptyInput);
    }
    for i in 0..warmup {
        f(&inputs[i % inputs.len()])?;
    }
    let mut times = Vec::with_capacity(reps);
    for i in 0..reps {
        let t0 = Instant::now();
        f(&inputs[i % inputs.len()])?;
        times.push(t0.elapsed().as_secs_f64());
    }
    Ok(TimingStats {
        repetitions: reps,
        mean_seconds: mean(&times).unwrap(),
        median_seconds: median(&times).unwrap(),
    })
}

/// Mean time of one multi-task prediction against the two single-task
/// predictions it replaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTiming {
    pub mtl: TimingStats,
    pub stl_cap: TimingStats,
    pub stl_res: TimingStats,
}

impl ComparisonTiming {
    pub fn stl_total_seconds(&self) -> f64 {
        self.stl_cap.mean_seconds + self.stl_res.mean_seconds
    }

    /// MTL mean time over the summed STL mean times.
    pub fn ratio(&self) -> f64 {
        self.mtl.mean_seconds / self.stl_total_seconds()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub stl: Option<f64>,
    pub mtl: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub timing: Option<ComparisonTiming>,
}

fn keys(report: &MetricsReport, channel: Channel) -> Vec<(String, usize)> {
    report
        .records
        .iter()
        .filter(|r| r.channel == channel)
        .map(|r| (r.cell_id.clone(), r.present_cycle))
        .collect()
}

/// Side-by-side accuracy rows plus the timing row. The STL side takes its
/// capacity rows from `stl_cap` and its resistance rows from `stl_res`.
pub fn compare_mtl_stl(
    mtl: &MetricsReport,
    stl_cap: &MetricsReport,
    stl_res: &MetricsReport,
    timing: Option<ComparisonTiming>,
) -> Result<ComparisonTable> {
    if keys(mtl, Channel::Capacity) != keys(stl_cap, Channel::Capacity)
        || keys(mtl, Channel::Resistance) != keys(stl_res, Channel::Resistance)
    {
        return Err(Error::invalid("reports cover different cells or positions"));
    }
    let (mc, mr) = (&mtl.capacity, &mtl.resistance);
    let (sc, sr) = (&stl_cap.capacity, &stl_res.resistance);
    let row = |metric: &str, stl: Option<f64>, mtl: Option<f64>| ComparisonRow {
        metric: metric.to_string(),
        stl,
        mtl,
    };
    let mut rows = vec![
        row(
            "Mean capacity curve MAPE [%]",
            Some(sc.mean_mape),
            Some(mc.mean_mape),
        ),
        row(
            "Median capacity curve MAPE [%]",
            Some(sc.median_mape),
            Some(mc.median_mape),
        ),
        row(
            "Max capacity curve MAPE [%]",
            Some(sc.max_mape),
            Some(mc.max_mape),
        ),
        row(
            "Median capacity knee-point error [cycle]",
            sc.median_knee_error,
            mc.median_knee_error,
        ),
        row(
            "Median EOL80 error [cycle]",
            sc.median_eol_first_error,
            mc.median_eol_first_error,
        ),
        row(
            "Median EOL65 error [cycle]",
            sc.median_eol_second_error,
            mc.median_eol_second_error,
        ),
        row(
            "Mean resistance curve MAPE [%]",
            Some(sr.mean_mape),
            Some(mr.mean_mape),
        ),
        row(
            "Median resistance curve MAPE [%]",
            Some(sr.median_mape),
            Some(mr.median_mape),
        ),
        row(
            "Max resistance curve MAPE [%]",
            Some(sr.max_mape),
            Some(mr.max_mape),
        ),
        row(
            "Median resistance knee-point error [cycle]",
            sr.median_knee_error,
            mr.median_knee_error,
        ),
        row(
            "Median EOL120 error [cycle]",
            sr.median_eol_first_error,
            mr.median_eol_first_error,
        ),
        row(
            "Median EOL130 error [cycle]",
            sr.median_eol_second_error,
            mr.median_eol_second_error,
        ),
    ];
    rows.push(row(
        "Mean computational cost [s]",
        timing.as_ref().map(|t| t.stl_total_seconds()),
        timing.as_ref().map(|t| t.mtl.mean_seconds),
    ));
    Ok(ComparisonTable { rows, timing })
}
