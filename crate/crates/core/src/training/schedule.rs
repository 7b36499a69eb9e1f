//! Stage schedules and the multi-stage / single-task training drivers.

use serde::{Deserialize, Serialize};

use super::objective::{ParamSubset, TrainModel};
use super::samples::TrainingSample;
use super::stage::{train_stage, HistoryRow, StageConfig, StageOutcome};
use crate::error::{Error, Result};
use crate::numeric::ParamSet;
use crate::seqmodel::{Channel, MtlModel, StlModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub stages: Vec<StageConfig>,
}

impl Schedule {
    /// Full-scale three-stage schedule: capacity path, then the resistance
    /// decoder on a frozen encoder, then everything on the total loss.
    pub fn mtl_reference() -> Self {
        Self {
            stages: vec![
                StageConfig::new(1, 1e-4, 450, 384, [1.0, 0.0], ParamSubset::EncoderCap),
                StageConfig::new(2, 1e-4, 450, 384, [0.0, 1.0], ParamSubset::ResDecoder),
                StageConfig::new(3, 1e-5, 300, 512, [1.0, 1.0], ParamSubset::All),
            ],
        }
    }

    /// Full-scale single-task schedule for one channel.
    pub fn stl_reference(channel: Channel) -> Self {
        Self {
            stages: vec![StageConfig::new(
                1,
                1e-4,
                450,
                384,
                stl_weights(channel),
                ParamSubset::All,
            )],
        }
    }

    /// Desk-scale three-stage schedule: same structure and learning-rate
    /// ratios, epochs capped at 60/60/40, with batch size and learning rate
    /// scaled to a fleet of roughly a thousand samples.
    pub fn mtl_desk() -> Self {
        Self {
            stages: vec![
                StageConfig::new(
                    1,
                    DESK_LR,
                    60,
                    DESK_BATCH,
                    [1.0, 0.0],
                    ParamSubset::EncoderCap,
                ),
                StageConfig::new(
                    2,
                    DESK_LR,
                    60,
                    DESK_BATCH,
                    [0.0, 1.0],
                    ParamSubset::ResDecoder,
                ),
                StageConfig::new(
                    3,
                    DESK_LR / 10.0,
                    40,
                    DESK_BATCH,
                    [1.0, 1.0],
                    ParamSubset::All,
                ),
            ],
        }
    }

    pub fn stl_desk(channel: Channel) -> Self {
        Self {
            stages: vec![StageConfig::new(
                1,
                DESK_LR,
                60,
                DESK_BATCH,
                stl_weights(channel),
                ParamSubset::All,
            )],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Config("schedule has no stages".into()));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if s.stage != i + 1 {
                return Err(Error::Config(format!(
                    "stage {} listed at position {}",
                    s.stage,
                    i + 1
                )));
            }
            s.validate()?;
        }
        Ok(())
    }
}

pub const DESK_LR: f64 = 3e-3;
pub const DESK_BATCH: usize = 32;

fn stl_weights(channel: Channel) -> [f64; 2] {
    match channel {
        Channel::Capacity => [1.0, 0.0],
        Channel::Resistance => [0.0, 1.0],
    }
}

/// Named flat-parameter ranges of a model, for change tracking.
type BlockFn<M> = dyn Fn(&M) -> Vec<(&'static str, std::ops::Range<usize>)>;

#[derive(Clone, Debug, PartialEq)]
pub struct StageReport {
    pub config: StageConfig,
    pub outcome: StageOutcome,
    /// Parameter blocks the optimizer moved during the stage.
    pub changed_blocks: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct TrainingReport {
    pub stages: Vec<StageReport>,
}

impl TrainingReport {
    pub fn history(&self) -> Vec<HistoryRow> {
        self.stages
            .iter()
            .flat_map(|s| s.outcome.history.iter().cloned())
            .collect()
    }
}

fn changed(
    before: &[f64],
    after: &[f64],
    blocks: &[(&str, std::ops::Range<usize>)],
) -> Vec<String> {
    blocks
        .iter()
        .filter(|(_, r)| before[r.clone()] != after[r.clone()])
        .map(|(n, _)| n.to_string())
        .collect()
}

fn run<M: TrainModel>(
    model: &mut M,
    train: &[TrainingSample],
    val: &[TrainingSample],
    schedule: &Schedule,
    seed: u64,
    blocks: &BlockFn<M>,
    observer: &mut dyn FnMut(&HistoryRow),
) -> Result<TrainingReport> {
    schedule.validate()?;
    let mut report = TrainingReport::default();
    for stage in &schedule.stages {
        let before = model.params_flat();
        let outcome = train_stage(model, train, val, stage, seed, observer)?;
        report.stages.push(StageReport {
            config: stage.clone(),
            changed_blocks: changed(&before, &outcome.last_params, &blocks(model)),
            outcome,
        });
    }
    Ok(report)
}

/// Runs every stage of `schedule` in order on the multi-task model.
pub fn train_multistage(
    model: &mut MtlModel,
    train: &[TrainingSample],
    val: &[TrainingSample],
    schedule: &Schedule,
    seed: u64,
    observer: &mut dyn FnMut(&HistoryRow),
) -> Result<TrainingReport> {
    let blocks = |m: &MtlModel| {
        vec![
            ("encoder", m.params.encoder_range()),
            ("decoder_cap", m.params.decoder_range(Channel::Capacity)),
            ("decoder_res", m.params.decoder_range(Channel::Resistance)),
        ]
    };
    run(model, train, val, schedule, seed, &blocks, observer)
}

/// Runs a single-task schedule; every stage must update all parameters.
pub fn train_stl(
    model: &mut StlModel,
    train: &[TrainingSample],
    val: &[TrainingSample],
    schedule: &Schedule,
    seed: u64,
    observer: &mut dyn FnMut(&HistoryRow),
) -> Result<TrainingReport> {
    let blocks = |m: &StlModel| {
        let e = m.params.encoder.num_params();
        vec![("encoder", 0..e), ("decoder", e..m.params.num_params())]
    };
    run(model, train, val, schedule, seed, &blocks, observer)
}
