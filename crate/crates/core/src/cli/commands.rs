//! Experiment commands. Each reads its inputs, writes an output directory
//! and finishes with a manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::artifacts::{
    create_dir, load_dataset, load_series_file, read_bytes, read_json, save_dataset, write_bytes,
    write_json, write_manifest, write_with, TIMING_FILE,
};
use super::config::RunConfig;
use crate::dataprep::{
    group_by_cell, interpolate_pchip, load_checkups, synth_fleet, CellSeries, GroundTruth,
    Normalizer,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    compare_mtl_stl, degradation_metrics, eol_cycle, knee_references, noise_sweep,
    progression_eval, time_calls, ComparisonTiming, Direction, EvalContext, KneeReferences,
    MetricsReport, NoiseColumn,
};
use crate::kneepoint::{knee_online, Curve, SmoothingSpec};
use crate::numeric::{RegularizationSpec, SeededRng};
use crate::seqmodel::{deserialize, Channel, Checkpoint, MtlModel, StlModel, StlPair};
use crate::training::{
    build_fleet_samples, gradient_check_mini, split_indices, train_multistage, train_stl,
    write_history_csv, GradCheckReport, SplitSpec, TrainingReport,
};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_META_FILE: &str = "train_meta.json";

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg
        .paths
        .out
        .clone()
        .ok_or_else(|| Error::Config("an output directory is required (--out)".into()))?;
    create_dir(&dir)?;
    Ok(dir)
}

fn data_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.paths
        .data
        .as_deref()
        .ok_or_else(|| Error::Config("a data path is required (--data)".into()))
}

fn checkpoint_path(cfg: &RunConfig) -> Result<&Path> {
    cfg.paths
        .checkpoint
        .as_deref()
        .ok_or_else(|| Error::Config("a checkpoint is required (--checkpoint)".into()))
}

/// Training, validation and test cells of a fleet under the run seed.
#[derive(Clone, Debug)]
pub struct FleetSplit {
    pub train: Vec<CellSeries>,
    pub val: Vec<CellSeries>,
    pub test: Vec<CellSeries>,
}

pub fn split_fleet(cells: &[CellSeries], seed: u64) -> Result<FleetSplit> {
    let idx = split_indices(cells.len(), SplitSpec { seed })?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| cells[i].clone()).collect::<Vec<_>>();
    Ok(FleetSplit {
        train: pick(&idx.train),
        val: pick(&idx.val),
        test: pick(&idx.test),
    })
}

/// SOH references fitted on the training cells only.
pub fn fit_normalizer(train: &[CellSeries]) -> Result<Normalizer> {
    let initial: Vec<f64> = train.iter().map(|c| c.resistance[0]).collect();
    Normalizer::from_initial_resistances(&initial)
}

/// What evaluation needs from training besides the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub mode: TrainMode,
    pub normalizer: Normalizer,
    pub knee_references: KneeReferences,
    pub train_cells: Vec<String>,
    pub val_cells: Vec<String>,
    pub test_cells: Vec<String>,
    pub stages: Vec<StageSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val: f64,
    pub changed_blocks: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TrainMode {
    Mtl,
    StlCap,
    StlRes,
}

fn ids(cells: &[CellSeries]) -> Vec<String> {
    cells.iter().map(|c| c.cell_id.clone()).collect()
}

fn stage_summaries(report: &TrainingReport) -> Vec<StageSummary> {
    report
        .stages
        .iter()
        .map(|s| StageSummary {
            stage: s.config.stage,
            epochs_run: s.outcome.epochs_run,
            best_epoch: s.outcome.best_epoch,
            best_val: s.outcome.best_val,
            changed_blocks: s.changed_blocks.iter().map(|b| b.to_string()).collect(),
        })
        .collect()
}

/// A trained forecaster with everything needed to score it.
pub enum Trained {
    Mtl(MtlModel),
    Stl(StlModel),
}

/// Trains one model on the split; `observer` sees every epoch.
pub fn train_model(
    cfg: &RunConfig,
    split: &FleetSplit,
    mode: TrainMode,
    observer: &mut dyn FnMut(&crate::training::HistoryRow),
) -> Result<(Trained, TrainMeta, TrainingReport)> {
    let normalizer = fit_normalizer(&split.train)?;
    let config = cfg.model_config();
    let stride = cfg.training.sample_stride;
    let train_s = build_fleet_samples(&split.train, &normalizer, &config, stride)?;
    let val_s = build_fleet_samples(&split.val, &normalizer, &config, stride)?;
    let reg = RegularizationSpec::default();
    let (model, report) = match mode {
        TrainMode::Mtl => {
            let mut m = MtlModel::new(config, normalizer, reg, cfg.seed)?;
            let r = train_multistage(
                &mut m,
                &train_s,
                &val_s,
                &cfg.mtl_schedule(),
                cfg.seed,
                observer,
            )?;
            (Trained::Mtl(m), r)
        }
        TrainMode::StlCap | TrainMode::StlRes => {
            let ch = if mode == TrainMode::StlCap {
                Channel::Capacity
            } else {
                Channel::Resistance
            };
            let mut m = StlModel::new(config, ch, normalizer, reg, cfg.seed)?;
            let r = train_stl(
                &mut m,
                &train_s,
                &val_s,
                &cfg.stl_schedule(ch),
                cfg.seed,
                observer,
            )?;
            (Trained::Stl(m), r)
        }
    };
    let meta = TrainMeta {
        mode,
        normalizer,
        knee_references: knee_references(&split.train, &normalizer)?,
        train_cells: ids(&split.train),
        val_cells: ids(&split.val),
        test_cells: ids(&split.test),
        stages: stage_summaries(&report),
    };
    Ok((model, meta, report))
}

pub fn cmd_prepare(cfg: &RunConfig) -> Result<()> {
    let records = load_checkups(data_path(cfg)?)?;
    let cells = group_by_cell(&records)
        .into_iter()
        .map(|(id, recs)| {
            interpolate_pchip(&recs).map_err(|e| Error::Cell {
                cell_id: id.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = out_dir(cfg)?;
    let info = save_dataset(&dir, &cells)?;
    eprintln!(
        "prepared {} cells, r_base {:.4} mΩ",
        info.cells.len(),
        info.normalizer.r_base
    );
    write_manifest(&dir, "prepare", cfg)?;
    Ok(())
}

fn write_ground_truth(path: &Path, truth: &[GroundTruth]) -> Result<()> {
    write_with(path, |out| {
        use std::io::Write;
        writeln!(
            out,
            "cell_id,last_cycle,cap_knee,res_knee,eol80,eol65,eol120,eol130"
        )?;
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for t in truth {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                t.cell_id,
                t.last_cycle,
                o(t.cap_knee),
                o(t.res_knee),
                o(t.eol80),
                o(t.eol65),
                o(t.eol120),
                o(t.eol130)
            )?;
        }
        Ok(())
    })
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    let fleet = synth_fleet(cfg.synth.n_cells, cfg.seed, &cfg.synth.params)?;
    let dir = out_dir(cfg)?;
    let cells: Vec<CellSeries> = fleet.iter().map(|c| c.series.clone()).collect();
    save_dataset(&dir, &cells)?;
    let truth: Vec<GroundTruth> = fleet.into_iter().map(|c| c.truth).collect();
    write_ground_truth(&dir.join("ground_truth.csv"), &truth)?;
    write_json(&dir.join("ground_truth.json"), &truth)?;
    eprintln!("synthesized {} cells", truth.len());
    write_manifest(&dir, "synth", cfg)?;
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, mode: TrainMode) -> Result<()> {
    let cells = load_dataset(data_path(cfg)?)?;
    let split = split_fleet(&cells, cfg.seed)?;
    let dir = out_dir(cfg)?;
    let (model, meta, report) = train_model(cfg, &split, mode, &mut |row| {
        eprintln!(
            "stage {} epoch {:4} train {:.6} val {:.6}",
            row.stage, row.epoch, row.train_loss, row.val_loss
        );
    })?;
    let bytes = match &model {
        Trained::Mtl(m) => m.to_bytes(),
        Trained::Stl(m) => m.to_bytes(),
    };
    let ckpt = cfg
        .paths
        .checkpoint
        .clone()
        .unwrap_or_else(|| dir.join(CHECKPOINT_FILE));
    write_bytes(&ckpt, &bytes)?;
    write_json(&dir.join(TRAIN_META_FILE), &meta)?;
    write_with(&dir.join("history.csv"), |out| {
        write_history_csv(out, &report.history())
    })?;
    write_manifest(&dir, "train", cfg)?;
    Ok(())
}

/// Training metadata stored next to a checkpoint.
pub fn load_meta(checkpoint: &Path) -> Result<Option<TrainMeta>> {
    let path = checkpoint.with_file_name(TRAIN_META_FILE);
    if path.is_file() {
        Ok(Some(read_json(&path)?))
    } else {
        Ok(None)
    }
}

fn load_mtl(path: &Path) -> Result<MtlModel> {
    MtlModel::from_bytes(&read_bytes(path)?)
}

fn load_stl(path: &Path, channel: Channel) -> Result<StlModel> {
    let m = StlModel::from_bytes(&read_bytes(path)?)?;
    if m.channel != channel {
        return Err(Error::Config(format!(
            "{} holds a {} model, expected {channel}",
            path.display(),
            m.channel
        )));
    }
    Ok(m)
}

/// Events read off one forecast channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelForecast {
    pub channel: Channel,
    /// SOH per output step.
    pub soh: Vec<f64>,
    /// Ah or mΩ per output step.
    pub physical: Vec<f64>,
    pub knee_cycle: Option<f64>,
    pub eol_first: Option<f64>,
    pub eol_second: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub cell_id: String,
    pub present_cycle: usize,
    /// Cycle of the first output step.
    pub start_cycle: usize,
    pub step_cycles: usize,
    pub channels: Vec<ChannelForecast>,
}

#[allow(clippy::too_many_arguments)]
fn channel_forecast(
    ch: Channel,
    soh: &[f64],
    present_soh: f64,
    present: usize,
    step: usize,
    normalizer: &Normalizer,
    cfg: &RunConfig,
    knee_ref: Option<f64>,
) -> ChannelForecast {
    let mut anchored = vec![present_soh];
    anchored.extend_from_slice(soh);
    let curve = Curve::new(&anchored, present as f64, step as f64);
    let t = &cfg.thresholds;
    let (f1, f2, dir) = match ch {
        Channel::Capacity => (t.cap_first, t.cap_second, Direction::Falling),
        Channel::Resistance => (t.res_first, t.res_second, Direction::Rising),
    };
    ChannelForecast {
        channel: ch,
        soh: soh.to_vec(),
        physical: normalizer.denormalize(ch, soh),
        knee_cycle: knee_ref
            .and_then(|r| knee_online(curve, r, SmoothingSpec::for_step(step as f64)).ok()),
        eol_first: eol_cycle(curve, f1, 1.0, dir).filter(|&c| c > present as f64),
        eol_second: eol_cycle(curve, f2, 1.0, dir).filter(|&c| c > present as f64),
    }
}

/// Forecast from the first `at_cycle` cycles of one cell.
pub fn predict_cell(
    cfg: &RunConfig,
    checkpoint: &Path,
    cell: &CellSeries,
    at_cycle: usize,
) -> Result<PredictionReport> {
    if at_cycle > cell.last_cycle() {
        return Err(Error::invalid(format!(
            "--at-cycle {at_cycle} beyond the last cycle {} of {}",
            cell.last_cycle(),
            cell.cell_id
        )));
    }
    let meta = load_meta(checkpoint)?;
    let refs = meta.as_ref().map(|m| m.knee_references);
    let cap = &cell.capacity[..=at_cycle];
    let res = &cell.resistance[..=at_cycle];
    let (normalizer, preds, start, step) = match deserialize(&read_bytes(checkpoint)?)? {
        Checkpoint::Mtl(m) => {
            let p = m.predict(cap, res)?;
            let preds = Channel::BOTH
                .map(|ch| (ch, p.channel(ch).to_vec()))
                .to_vec();
            (m.normalizer, preds, p.start_cycle, p.step_cycles)
        }
        Checkpoint::Stl(m) => {
            let p = m.predict(&cell.channel(m.channel)[..=at_cycle])?;
            (
                m.normalizer,
                vec![(m.channel, p.values)],
                p.start_cycle,
                p.step_cycles,
            )
        }
    };
    let channels = preds
        .into_iter()
        .map(|(ch, soh)| {
            let present_soh = normalizer.to_soh(ch, cell.channel(ch)[at_cycle]);
            channel_forecast(
                ch,
                &soh,
                present_soh,
                at_cycle,
                step,
                &normalizer,
                cfg,
                refs.map(|r| r.get(ch)),
            )
        })
        .collect();
    Ok(PredictionReport {
        cell_id: cell.cell_id.clone(),
        present_cycle: at_cycle,
        start_cycle: start,
        step_cycles: step,
        channels,
    })
}

pub fn cmd_predict(cfg: &RunConfig, at_cycle: usize) -> Result<()> {
    let cell = load_series_file(data_path(cfg)?)?;
    let report = predict_cell(cfg, checkpoint_path(cfg)?, &cell, at_cycle)?;
    match &cfg.paths.out {
        Some(path) => write_json(path, &report),
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

/// Test cells and the evaluation context of a trained checkpoint. Without
/// training metadata the split and references are recomputed from the seed.
fn eval_inputs(
    cfg: &RunConfig,
    checkpoint: &Path,
    normalizer: Normalizer,
) -> Result<(Vec<CellSeries>, Vec<CellSeries>, EvalContext)> {
    let cells = load_dataset(data_path(cfg)?)?;
    let split = split_fleet(&cells, cfg.seed)?;
    let refs = match load_meta(checkpoint)? {
        Some(meta) => {
            if meta.test_cells != ids(&split.test) {
                return Err(Error::Config(
                    "checkpoint was trained on a different split (seed or dataset changed)".into(),
                ));
            }
            meta.knee_references
        }
        None => knee_references(&split.train, &normalizer)?,
    };
    let mut ctx = EvalContext::new(cfg.model_config(), normalizer, refs);
    ctx.thresholds = cfg.thresholds;
    ctx.stride = cfg.training.sample_stride;
    Ok((cells, split.test, ctx))
}

fn write_report(dir: &Path, stem: &str, report: &MetricsReport, ctx: &EvalContext) -> Result<()> {
    #[derive(Serialize)]
    struct Summary<'a> {
        capacity: &'a crate::evaluation::ChannelSummary,
        resistance: &'a crate::evaluation::ChannelSummary,
        table: Vec<crate::evaluation::TableRow>,
    }
    write_json(
        &dir.join(format!("{stem}.json")),
        &Summary {
            capacity: &report.capacity,
            resistance: &report.resistance,
            table: report.table_rows(&ctx.thresholds),
        },
    )?;
    write_with(&dir.join(format!("{stem}_records.csv")), |out| {
        report.write_records_csv(out)
    })
}

fn write_table_csv(path: &Path, rows: &[crate::evaluation::TableRow]) -> Result<()> {
    write_with(path, |out| {
        use std::io::Write;
        writeln!(out, "channel,metric,value")?;
        for r in rows {
            writeln!(
                out,
                "{},{},{}",
                r.channel,
                r.metric,
                r.value.map(|v| v.to_string()).unwrap_or_default()
            )?;
        }
        Ok(())
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let ckpt = checkpoint_path(cfg)?;
    let model = load_mtl(ckpt)?;
    let (cells, test, mut ctx) = eval_inputs(cfg, ckpt, model.normalizer)?;
    ctx.config = model.config;
    let report = progression_eval(&model, &test, &ctx)?;
    let dir = out_dir(cfg)?;
    write_report(&dir, "metrics", &report, &ctx)?;
    write_table_csv(&dir.join("table.csv"), &report.table_rows(&ctx.thresholds))?;
    let degradation = degradation_metrics(&cells, &model.normalizer, &ctx.thresholds)?;
    write_with(&dir.join("degradation.csv"), |out| {
        degradation.write_cells_csv(out)
    })?;
    write_with(&dir.join("correlations.csv"), |out| {
        degradation.write_rho_csv(out)
    })?;
    for ch in Channel::BOTH {
        let s = report.summary(ch);
        eprintln!(
            "{ch}: mean MAPE {:.3}%  max {:.3}%",
            s.mean_mape, s.max_mape
        );
    }
    write_manifest(&dir, "evaluate", cfg)?;
    Ok(())
}

/// One row per metric, one column per noise level.
fn write_noise_table(path: &Path, columns: &[NoiseColumn], ctx: &EvalContext) -> Result<()> {
    write_with(path, |out| {
        use std::io::Write;
        let header: Vec<String> = columns
            .iter()
            .map(|c| format!("sigma_{}", c.sigma_fraction))
            .collect();
        writeln!(out, "channel,metric,{}", header.join(","))?;
        let tables: Vec<_> = columns
            .iter()
            .map(|c| c.report.table_rows(&ctx.thresholds))
            .collect();
        for (i, row) in tables[0].iter().enumerate() {
            let vals: Vec<String> = tables
                .iter()
                .map(|t| t[i].value.map(|v| v.to_string()).unwrap_or_default())
                .collect();
            writeln!(out, "{},{},{}", row.channel, row.metric, vals.join(","))?;
        }
        Ok(())
    })
}

/// Seed of the input-noise draws, split from the root seed.
pub fn noise_seed(root: u64) -> u64 {
    SeededRng::new(root).split("input-noise").next_u64()
}

pub fn cmd_noise_sweep(cfg: &RunConfig) -> Result<()> {
    let ckpt = checkpoint_path(cfg)?;
    let model = load_mtl(ckpt)?;
    let (_, test, mut ctx) = eval_inputs(cfg, ckpt, model.normalizer)?;
    ctx.config = model.config;
    let columns = noise_sweep(&model, &test, &ctx, &cfg.noise.grid, noise_seed(cfg.seed))?;
    let dir = out_dir(cfg)?;
    write_noise_table(&dir.join("noise_table.csv"), &columns, &ctx)?;
    let summary: Vec<_> = columns
        .iter()
        .map(|c| (c.sigma_fraction, &c.report.capacity, &c.report.resistance))
        .collect();
    write_json(&dir.join("noise_sweep.json"), &summary)?;
    write_manifest(&dir, "noise-sweep", cfg)?;
    Ok(())
}

/// Evaluation inputs of every test position, for timing.
fn timing_inputs(test: &[CellSeries], ctx: &EvalContext) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    for c in test {
        for p in crate::training::sample_positions(c.last_cycle(), &ctx.config, ctx.stride) {
            out.push((c.capacity[..=p].to_vec(), c.resistance[..=p].to_vec()));
        }
    }
    out
}

/// Mean wall time of MTL and STL predictions over the same inputs.
pub fn time_models(
    mtl: &MtlModel,
    stl: &StlPair,
    inputs: &[(Vec<f64>, Vec<f64>)],
    cfg: &RunConfig,
) -> Result<ComparisonTiming> {
    let (w, n) = (cfg.timing.warmup, cfg.timing.repetitions);
    Ok(ComparisonTiming {
        mtl: time_calls(inputs, w, n, |(c, r)| mtl.predict(c, r).map(drop))?,
        stl_cap: time_calls(inputs, w, n, |(c, _)| stl.cap.predict(c).map(drop))?,
        stl_res: time_calls(inputs, w, n, |(_, r)| stl.res.predict(r).map(drop))?,
    })
}

/// `--checkpoint` is the MTL model; the STL pair comes from the two extra
/// paths.
pub fn cmd_compare(cfg: &RunConfig, stl_cap: &Path, stl_res: &Path) -> Result<()> {
    let ckpt = checkpoint_path(cfg)?;
    let mtl = load_mtl(ckpt)?;
    let stl = StlPair {
        cap: load_stl(stl_cap, Channel::Capacity)?,
        res: load_stl(stl_res, Channel::Resistance)?,
    };
    let (_, test, mut ctx) = eval_inputs(cfg, ckpt, mtl.normalizer)?;
    ctx.config = mtl.config;
    let mtl_report = progression_eval(&mtl, &test, &ctx)?;
    let stl_report = progression_eval(&stl, &test, &ctx)?;
    let timing = time_models(&mtl, &stl, &timing_inputs(&test, &ctx), cfg)?;
    let table = compare_mtl_stl(&mtl_report, &stl_report, &stl_report, Some(timing.clone()))?;

    let dir = out_dir(cfg)?;
    // Accuracy rows only; the timing row lives in the timing file.
    write_with(&dir.join("compare.csv"), |out| {
        use std::io::Write;
        writeln!(out, "metric,stl,mtl")?;
        let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &table.rows[..table.rows.len() - 1] {
            writeln!(out, "{},{},{}", r.metric, o(r.stl), o(r.mtl))?;
        }
        Ok(())
    })?;
    write_report(&dir, "mtl_metrics", &mtl_report, &ctx)?;
    write_report(&dir, "stl_metrics", &stl_report, &ctx)?;
    #[derive(Serialize)]
    struct TimingFile<'a> {
        row: &'a crate::evaluation::ComparisonRow,
        detail: &'a ComparisonTiming,
        mtl_over_stl: f64,
    }
    write_json(
        &dir.join(TIMING_FILE),
        &TimingFile {
            row: table.rows.last().expect("timing row"),
            detail: &timing,
            mtl_over_stl: timing.ratio(),
        },
    )?;
    eprintln!("MTL/STL prediction time ratio {:.3}", timing.ratio());
    write_manifest(&dir, "compare", cfg)?;
    Ok(())
}

/// Runs the miniature finite-difference audit and reports the worst coordinate.
pub fn cmd_gradcheck(cfg: &RunConfig, flip_sign: bool) -> Result<GradCheckReport> {
    let report = gradient_check_mini(cfg.seed, flip_sign)?;
    let json = serde_json::to_string_pretty(&report)?;
    match &cfg.paths.out {
        Some(dir) => {
            create_dir(dir)?;
            write_json(&dir.join("gradcheck.json"), &report)?;
            write_manifest(dir, "gradcheck", cfg)?;
        }
        None => println!("{json}"),
    }
    eprintln!(
        "gradcheck {}: max relative error {:.3e} at {} (analytic {:.6e}, numeric {:.6e})",
        if report.passed { "PASS" } else { "FAIL" },
        report.max_relative_error,
        report.worst_tensor,
        report.worst_analytic,
        report.worst_numeric
    );
    Ok(report)
}
