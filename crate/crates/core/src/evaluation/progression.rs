//! Lifetime error progression: forecast at every position of every test cell
//! and score curves, knees and end-of-life cycles.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::metrics::{
    eol_cycle, mae, mape, max, mean, median, percentile, Direction, EolThresholds,
};
use crate::dataprep::{perturb, CellSeries, NoiseSpec, Normalizer};
use crate::error::{Error, Result};
use crate::kneepoint::{knee_offline, knee_online, reference_gradient, Curve, SmoothingSpec};
use crate::numeric::SeededRng;
use crate::seqmodel::{Channel, Forecaster, ModelConfig, SOH_C_FLOOR, SOH_R_CEIL};
use crate::training::{sample_positions, target_steps, SAMPLE_STRIDE_CYCLES};

/// Median SOH gradient magnitude (per cycle) at the offline knees of the
/// reference cells, per channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneeReferences {
    pub capacity: f64,
    pub resistance: f64,
}

impl KneeReferences {
    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Capacity => self.capacity,
            Channel::Resistance => self.resistance,
        }
    }
}

/// Offline knee of a per-cycle SOH curve with the default smoothing.
fn offline_knee_soh(soh: &[f64]) -> Result<crate::kneepoint::KneeResult> {
    knee_offline(Curve::per_cycle(soh), SmoothingSpec::for_step(1.0))
}

pub fn knee_references(cells: &[CellSeries], normalizer: &Normalizer) -> Result<KneeReferences> {
    let mut refs = [0.0; 2];
    for (slot, ch) in refs.iter_mut().zip(Channel::BOTH) {
        let knees = cells
            .iter()
            .map(|c| offline_knee_soh(&normalizer.normalize(ch, c.channel(ch))))
            .collect::<Result<Vec<_>>>()?;
        *slot = reference_gradient(&knees)?;
    }
    Ok(KneeReferences {
        capacity: refs[0],
        resistance: refs[1],
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalContext {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub thresholds: EolThresholds,
    pub knee_refs: KneeReferences,
    pub stride: usize,
    /// Input noise; targets stay clean.
    pub noise: Option<NoiseSpec>,
}

impl EvalContext {
    pub fn new(config: ModelConfig, normalizer: Normalizer, knee_refs: KneeReferences) -> Self {
        Self {
            config,
            normalizer,
            thresholds: EolThresholds::default(),
            knee_refs,
            stride: SAMPLE_STRIDE_CYCLES,
            noise: None,
        }
    }

    fn eol_levels(&self, channel: Channel) -> [(f64, Direction); 2] {
        let t = &self.thresholds;
        match channel {
            Channel::Capacity => [
                (t.cap_first, Direction::Falling),
                (t.cap_second, Direction::Falling),
            ],
            Channel::Resistance => [
                (t.res_first, Direction::Rising),
                (t.res_second, Direction::Rising),
            ],
        }
    }
}

/// Scores of one channel's forecast at one position. Event errors are
/// absolute cycle differences, present only while the true event still lies
/// ahead of the position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionRecord {
    pub cell_id: String,
    pub present_cycle: usize,
    pub channel: Channel,
    pub points: usize,
    pub curve_mape: f64,
    /// mAh for capacity, mΩ for resistance.
    pub curve_mae: f64,
    pub knee_error: Option<f64>,
    pub eol_first_error: Option<f64>,
    pub eol_second_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSummary {
    pub channel: Channel,
    pub positions: usize,
    pub mean_mape: f64,
    pub max_mape: f64,
    pub median_mape: f64,
    pub p5_mape: f64,
    pub p95_mape: f64,
    pub mean_mae: f64,
    pub max_mae: f64,
    pub median_mae: f64,
    /// Whole cycles; `None` when no position had the event ahead of it.
    pub median_knee_error: Option<f64>,
    pub median_eol_first_error: Option<f64>,
    pub median_eol_second_error: Option<f64>,
    /// Cells with the lowest and highest lifetime-mean curve MAPE.
    pub best_cell: String,
    pub worst_cell: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub records: Vec<PositionRecord>,
    pub capacity: ChannelSummary,
    pub resistance: ChannelSummary,
}

/// Labelled row of the headline table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub channel: Channel,
    pub metric: String,
    pub value: Option<f64>,
}

fn round_cycles(v: Option<f64>) -> Option<f64> {
    v.map(f64::round)
}

fn summarize(records: &[PositionRecord], channel: Channel) -> Result<ChannelSummary> {
    let rs: Vec<&PositionRecord> = records.iter().filter(|r| r.channel == channel).collect();
    if rs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mapes: Vec<f64> = rs.iter().map(|r| r.curve_mape).collect();
    let maes: Vec<f64> = rs.iter().map(|r| r.curve_mae).collect();
    let collect = |f: &dyn Fn(&PositionRecord) -> Option<f64>| -> Vec<f64> {
        rs.iter().filter_map(|r| f(r)).collect()
    };
    let knee = collect(&|r| r.knee_error);
    let first = collect(&|r| r.eol_first_error);
    let second = collect(&|r| r.eol_second_error);

    let mut cells: Vec<(String, Vec<f64>)> = Vec::new();
    for r in &rs {
        match cells.last_mut() {
            Some((id, v)) if *id == r.cell_id => v.push(r.curve_mape),
            _ => cells.push((r.cell_id.clone(), vec![r.curve_mape])),
        }
    }
    let cell_means: Vec<(String, f64)> = cells
        .into_iter()
        .map(|(id, v)| (id, mean(&v).unwrap()))
        .collect();
    let best = cell_means
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let worst = cell_means
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();

    Ok(ChannelSummary {
        channel,
        positions: rs.len(),
        mean_mape: mean(&mapes).unwrap(),
        max_mape: max(&mapes).unwrap(),
        median_mape: median(&mapes).unwrap(),
        p5_mape: percentile(&mapes, 5.0).unwrap(),
        p95_mape: percentile(&mapes, 95.0).unwrap(),
        mean_mae: mean(&maes).unwrap(),
        max_mae: max(&maes).unwrap(),
        median_mae: median(&maes).unwrap(),
        median_knee_error: round_cycles(median(&knee)),
        median_eol_first_error: round_cycles(median(&first)),
        median_eol_second_error: round_cycles(median(&second)),
        best_cell: best.0.clone(),
        worst_cell: worst.0.clone(),
    })
}

impl MetricsReport {
    pub fn from_records(records: Vec<PositionRecord>) -> Result<Self> {
        let capacity = summarize(&records, Channel::Capacity)?;
        let resistance = summarize(&records, Channel::Resistance)?;
        Ok(Self {
            records,
            capacity,
            resistance,
        })
    }

    pub fn summary(&self, channel: Channel) -> &ChannelSummary {
        match channel {
            Channel::Capacity => &self.capacity,
            Channel::Resistance => &self.resistance,
        }
    }

    /// Nine rows per channel, named as in the headline results table.
    pub fn table_rows(&self, thresholds: &EolThresholds) -> Vec<TableRow> {
        let mut rows = Vec::new();
        for ch in Channel::BOTH {
            let s = self.summary(ch);
            let (unit, first, second) = match ch {
                Channel::Capacity => ("mAh", thresholds.cap_first, thresholds.cap_second),
                Channel::Resistance => ("mΩ", thresholds.res_first, thresholds.res_second),
            };
            let mut push = |metric: String, value: Option<f64>| {
                rows.push(TableRow {
                    channel: ch,
                    metric,
                    value,
                })
            };
            push("Mean curve MAPE [%]".into(), Some(s.mean_mape));
            push("Max curve MAPE [%]".into(), Some(s.max_mape));
            push("Median curve MAPE [%]".into(), Some(s.median_mape));
            push(format!("Mean curve MAE [{unit}]"), Some(s.mean_mae));
            push(format!("Max curve MAE [{unit}]"), Some(s.max_mae));
            push(format!("Median curve MAE [{unit}]"), Some(s.median_mae));
            push(
                "Median knee-point error [cycle]".into(),
                s.median_knee_error,
            );
            push(
                format!("Median EOL{:.0} error [cycle]", first * 100.0),
                s.median_eol_first_error,
            );
            push(
                format!("Median EOL{:.0} error [cycle]", second * 100.0),
                s.median_eol_second_error,
            );
        }
        rows
    }

    pub fn write_records_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "cell_id,present_cycle,channel,points,curve_mape,curve_mae,knee_error,eol_first_error,eol_second_error"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.cell_id,
                r.present_cycle,
                r.channel,
                r.points,
                r.curve_mape,
                r.curve_mae,
                opt(r.knee_error),
                opt(r.eol_first_error),
                opt(r.eol_second_error)
            )?;
        }
        Ok(())
    }
}

/// Truth events of one cell, per channel: offline knee of the full per-cycle
/// curve.
struct CellTruth {
    soh: [Vec<f64>; 2],
    knee: [Option<f64>; 2],
}

fn cell_truth(cell: &CellSeries, normalizer: &Normalizer) -> CellTruth {
    let soh = Channel::BOTH.map(|ch| normalizer.normalize(ch, cell.channel(ch)));
    let knee = [0, 1].map(|i| offline_knee_soh(&soh[i]).ok().map(|k| k.knee_cycle));
    CellTruth { soh, knee }
}

/// Leading run of a channel's forecast inside the plausible SOH range.
fn plausible(values: &[f64], channel: Channel) -> &[f64] {
    let n = values
        .iter()
        .position(|&v| match channel {
            Channel::Capacity => v < SOH_C_FLOOR,
            Channel::Resistance => v > SOH_R_CEIL,
        })
        .unwrap_or(values.len());
    &values[..n]
}

/// Present value followed by a forecast, on the output grid starting at
/// `present`.
fn anchored(present_value: f64, forecast: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(forecast.len() + 1);
    v.push(present_value);
    v.extend_from_slice(forecast);
    v
}

/// Absolute error of a forecast event against a truth event still ahead of
/// `present`; a forecast that never reaches the event counts as reaching it
/// at the end of its horizon.
fn event_error(
    truth: Option<f64>,
    predicted: Option<f64>,
    present: usize,
    horizon_end: f64,
) -> Option<f64> {
    let t = truth.filter(|&t| t > present as f64)?;
    Some((predicted.unwrap_or(horizon_end) - t).abs())
}

/// Per-cycle histories up to `present`, noised when the context asks for it.
fn histories(
    cell: &CellSeries,
    cell_index: usize,
    present: usize,
    ctx: &EvalContext,
) -> [Vec<f64>; 2] {
    Channel::BOTH.map(|ch| {
        let mut h = cell.channel(ch)[..=present].to_vec();
        if let Some(noise) = &ctx.noise {
            let sigma = noise.sigma_fraction * cell.channel(ch)[0];
            let mut rng = SeededRng::new(noise.seed)
                .split_index("cell", cell_index as u64)
                .split_index(&format!("position-{ch}"), present as u64);
            perturb(&mut h, sigma, &mut rng);
        }
        h
    })
}

/// Forecasts every position of every cell and scores both channels.
pub fn progression_eval(
    model: &dyn Forecaster,
    cells: &[CellSeries],
    ctx: &EvalContext,
) -> Result<MetricsReport> {
    ctx.thresholds.validate()?;
    if let Some(n) = &ctx.noise {
        n.validate()?;
    }
    let cfg = &ctx.config;
    let step = cfg.out_step_cycles;
    let mut records = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        let truth = cell_truth(cell, &ctx.normalizer);
        let last = cell.last_cycle();
        for present in sample_positions(last, cfg, ctx.stride) {
            let n_true = target_steps(present, last, cfg);
            let hist = histories(cell, ci, present, ctx);
            let pred = model.forecast(&hist[0], &hist[1])?;
            for (k, ch) in Channel::BOTH.into_iter().enumerate() {
                let soh = &truth.soh[k];
                let forecast = pred.channel(ch);
                let truth_grid: Vec<f64> = (1..=n_true).map(|j| soh[present + j * step]).collect();
                let n = n_true.min(forecast.len());
                if n == 0 {
                    return Err(Error::Cell {
                        cell_id: cell.cell_id.clone(),
                        message: format!("empty forecast at cycle {present}"),
                    });
                }
                let base = ctx.normalizer.base(ch);
                let phys = |v: &[f64]| v.iter().map(|x| x * base).collect::<Vec<f64>>();
                let (p_phys, t_phys) = (phys(&forecast[..n]), phys(&truth_grid[..n]));
                let unit = match ch {
                    Channel::Capacity => 1000.0,
                    Channel::Resistance => 1.0,
                };

                let observed = ctx.normalizer.to_soh(ch, hist[k][present]);
                let pred_curve = anchored(observed, plausible(forecast, ch));
                let true_curve = anchored(soh[present], &truth_grid);
                let pc = Curve::new(&pred_curve, present as f64, step as f64);
                let tc = Curve::new(&true_curve, present as f64, step as f64);
                let horizon_end = pc.cycle_at((pred_curve.len() - 1) as f64);
                let [(f1, dir), (f2, _)] = ctx.eol_levels(ch);
                let eol = |c: Curve<'_>, f: f64| eol_cycle(c, f, 1.0, dir);
                let knee_pred = knee_online(
                    pc,
                    ctx.knee_refs.get(ch),
                    SmoothingSpec::for_step(step as f64),
                )
                .ok();

                records.push(PositionRecord {
                    cell_id: cell.cell_id.clone(),
                    present_cycle: present,
                    channel: ch,
                    points: n,
                    curve_mape: mape(&p_phys, &t_phys)?,
                    curve_mae: unit * mae(&p_phys, &t_phys)?,
                    knee_error: event_error(truth.knee[k], knee_pred, present, horizon_end),
                    eol_first_error: event_error(eol(tc, f1), eol(pc, f1), present, horizon_end),
                    eol_second_error: event_error(eol(tc, f2), eol(pc, f2), present, horizon_end),
                });
            }
        }
    }
    MetricsReport::from_records(records)
}
