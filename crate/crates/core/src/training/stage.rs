//! One optimization stage: Adam on a parameter subset with early stopping.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::objective::{LossWeights, ParamSubset, TrainModel};
use super::samples::TrainingSample;
use crate::error::{Error, Result};
use crate::numeric::{adam_step, regularization_acc, AdamState, ParamSet, SeededRng};

pub const DEFAULT_PATIENCE: usize = 32;
pub const DEFAULT_MIN_DELTA: f64 = 1e-5;
pub const DEFAULT_CLIP_NORM: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    /// 1-based position in its schedule.
    pub stage: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// `[w_cap, w_res]`.
    pub loss_weights: LossWeights,
    pub subset: ParamSubset,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_min_delta")]
    pub min_delta: f64,
    /// Global gradient-norm limit; 0 disables clipping.
    #[serde(default = "default_clip")]
    pub clip_norm: f64,
}

fn default_patience() -> usize {
    DEFAULT_PATIENCE
}
fn default_min_delta() -> f64 {
    DEFAULT_MIN_DELTA
}
fn default_clip() -> f64 {
    DEFAULT_CLIP_NORM
}

impl StageConfig {
    pub fn new(
        stage: usize,
        lr: f64,
        max_epochs: usize,
        batch_size: usize,
        loss_weights: LossWeights,
        subset: ParamSubset,
    ) -> Self {
        Self {
            stage,
            lr,
            max_epochs,
            batch_size,
            loss_weights,
            subset,
            patience: DEFAULT_PATIENCE,
            min_delta: DEFAULT_MIN_DELTA,
            clip_norm: DEFAULT_CLIP_NORM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("stage {}: {m}", self.stage)));
        // lr = 0 is accepted as a null update.
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be >= 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        let [wc, wr] = self.loss_weights;
        if !(wc >= 0.0 && wr >= 0.0 && wc.is_finite() && wr.is_finite()) || wc + wr == 0.0 {
            return bad(format!(
                "loss weights must be >= 0 and not both zero, got {:?}",
                self.loss_weights
            ));
        }
        if !(self.min_delta >= 0.0) || !(self.clip_norm >= 0.0) {
            return bad("min_delta and clip_norm must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    pub stage: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

pub fn write_history_csv(mut out: impl Write, rows: &[HistoryRow]) -> std::io::Result<()> {
    writeln!(out, "epoch,stage,train_loss,val_loss,lr")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.epoch, r.stage, r.train_loss, r.val_loss, r.lr
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StageOutcome {
    pub history: Vec<HistoryRow>,
    /// 0 when no epoch improved on the initial parameters.
    pub best_epoch: usize,
    pub best_val: f64,
    pub epochs_run: usize,
    /// Flat parameters after the final epoch, before the best snapshot is
    /// restored.
    pub last_params: Vec<f64>,
}

/// Sample-level work cache: when the encoder is frozen, contexts are
/// computed once per stage.
fn contexts<M: TrainModel>(
    model: &M,
    samples: &[TrainingSample],
    frozen: bool,
) -> Result<Option<Vec<Vec<f64>>>> {
    if !frozen {
        return Ok(None);
    }
    samples
        .iter()
        .map(|s| model.context(s))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn validation_loss<M: TrainModel>(
    model: &M,
    val: &[TrainingSample],
    weights: LossWeights,
    ctx: Option<&Vec<Vec<f64>>>,
) -> Result<f64> {
    let mut sum = 0.0;
    for (i, s) in val.iter().enumerate() {
        sum += model.sample_loss(s, weights, ctx.map(|c| c[i].as_slice()))?;
    }
    Ok(sum / val.len() as f64)
}

fn clip(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

/// Minimizes the stage's weighted masked MAE plus the penalty over
/// `stage.subset`, keeping the best-validation snapshot. `observer` sees
/// every history row as it is produced.
pub fn train_stage<M: TrainModel>(
    model: &mut M,
    train: &[TrainingSample],
    val: &[TrainingSample],
    stage: &StageConfig,
    seed: u64,
    observer: &mut dyn FnMut(&HistoryRow),
) -> Result<StageOutcome> {
    stage.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid(
            "training and validation sets must be non-empty",
        ));
    }
    let range = model.subset_range(stage.subset)?;
    let frozen = !stage.subset.includes_encoder();
    let train_ctx = contexts(model, train, frozen)?;
    let val_ctx = contexts(model, val, frozen)?;
    let reg = model.reg();
    let weights = stage.loss_weights;
    let diverged = |epoch: usize, detail: String| Error::Diverged {
        stage: stage.stage,
        epoch,
        detail,
    };

    let mut flat = model.params_flat();
    let mut adam = AdamState::new(range.len(), stage.lr);
    let mut rng = SeededRng::new(seed).split_index("batches", stage.stage as u64);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_val = validation_loss(model, val, weights, val_ctx.as_ref())?;
    if !best_val.is_finite() {
        return Err(diverged(0, format!("initial validation loss {best_val}")));
    }
    let mut best_flat = flat.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut epochs_run = 0;

    for epoch in 1..=stage.max_epochs {
        epochs_run = epoch;
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(stage.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let mut grads = model.zero_grads();
            let mut data = 0.0;
            for &i in batch {
                let ctx = train_ctx.as_ref().map(|c| c[i].as_slice());
                data += model.accumulate_grad(&train[i], weights, scale, ctx, &mut grads)?;
            }
            let mut g = grads.flatten().drain(range.clone()).collect::<Vec<_>>();
            let penalty = regularization_acc(&flat[range.clone()], &reg, &mut g)?;
            let batch_loss = data * scale + penalty;
            if !batch_loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
                return Err(diverged(
                    epoch,
                    format!("non-finite batch loss {batch_loss} or gradient"),
                ));
            }
            clip(&mut g, stage.clip_norm);
            adam_step(&mut flat[range.clone()], &g, &mut adam)?;
            model.set_params_flat(&flat);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = validation_loss(model, val, weights, val_ctx.as_ref())?;
        if !val_loss.is_finite() {
            return Err(diverged(epoch, format!("validation loss {val_loss}")));
        }
        let row = HistoryRow {
            epoch,
            stage: stage.stage,
            train_loss,
            val_loss,
            lr: stage.lr,
        };
        observer(&row);
        history.push(row);
        if val_loss < best_val - stage.min_delta {
            best_val = val_loss;
            best_epoch = epoch;
            best_flat.copy_from_slice(&flat);
        } else if epoch - best_epoch >= stage.patience {
            break;
        }
    }
    model.set_params_flat(&best_flat);
    Ok(StageOutcome {
        history,
        best_epoch,
        best_val,
        epochs_run,
        last_params: flat,
    })
}
