//! Padded input windows and the masking/concatenation front end.

use crate::error::{check_len, Error, Result};
use crate::numeric::Matrix2D;
use crate::seqmodel::{ModelConfig, MIN_HISTORY_CYCLES};

/// One channel of a fixed-length input window. Positions before `valid_from`
/// are zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedInput {
    values: Vec<f64>,
    valid_from: usize,
}

impl PaddedInput {
    pub fn new(values: Vec<f64>, valid_from: usize) -> Result<Self> {
        if valid_from > values.len() {
            return Err(Error::invalid(format!(
                "valid_from {valid_from} beyond window length {}",
                values.len()
            )));
        }
        if values[..valid_from].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("padding positions must be exactly zero"));
        }
        if values[valid_from..].iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input window"));
        }
        Ok(Self { values, valid_from })
    }

    /// Left-pads `real` with zeros up to `len` positions.
    pub fn pad_front(real: &[f64], len: usize) -> Result<Self> {
        if real.len() > len {
            return Err(Error::DimensionMismatch {
                operand: "input window",
                expected: len,
                actual: real.len(),
            });
        }
        let mut values = vec![0.0; len - real.len()];
        values.extend_from_slice(real);
        Self::new(values, len - real.len())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_from == self.values.len()
    }

    pub fn real(&self) -> &[f64] {
        &self.values[self.valid_from..]
    }

    /// Same window with `k` more leading pads.
    pub fn prepend_padding(&self, k: usize) -> Self {
        let mut values = vec![0.0; k];
        values.extend_from_slice(&self.values);
        Self {
            values,
            valid_from: self.valid_from + k,
        }
    }
}

/// The valid region of the input, one row per real timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedSequence {
    pub steps: Matrix2D,
    pub valid_from: usize,
}

impl MaskedSequence {
    pub fn channels(&self) -> usize {
        self.steps.cols()
    }

    pub fn len(&self) -> usize {
        self.steps.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.rows() == 0
    }
}

/// Drops the padded prefix of each channel and merges the channels per step.
pub fn mask_and_concat(cap_in: &PaddedInput, res_in: &PaddedInput) -> Result<MaskedSequence> {
    mask_channels(&[cap_in, res_in])
}

/// Single- or multi-channel form of [`mask_and_concat`].
pub fn mask_channels(channels: &[&PaddedInput]) -> Result<MaskedSequence> {
    let first = channels
        .first()
        .ok_or_else(|| Error::invalid("no input channels"))?;
    for ch in &channels[1..] {
        check_len("input window length", first.len(), ch.len())?;
        if ch.valid_from() != first.valid_from() {
            return Err(Error::invalid(format!(
                "channels disagree on valid_from: {} vs {}",
                first.valid_from(),
                ch.valid_from()
            )));
        }
    }
    if first.is_empty() {
        return Err(Error::EmptyInput);
    }
    let steps = first.len() - first.valid_from();
    let mut data = Vec::with_capacity(steps * channels.len());
    for t in first.valid_from()..first.len() {
        for ch in channels {
            data.push(ch.values()[t]);
        }
    }
    Ok(MaskedSequence {
        steps: Matrix2D::from_vec(steps, channels.len(), data)?,
        valid_from: first.valid_from(),
    })
}

/// Number of input steps for a history ending at `present` cycles.
pub fn input_steps(present: usize, step: usize) -> usize {
    present / step
}

/// Checks history bounds for a window ending at cycle `present`.
pub fn check_history(present: usize, config: &ModelConfig) -> Result<()> {
    if present < MIN_HISTORY_CYCLES {
        return Err(Error::InsufficientHistory {
            available: present,
            required: MIN_HISTORY_CYCLES,
        });
    }
    if present > config.max_history_cycles() {
        return Err(Error::HistoryTooLong {
            available: present,
            limit: config.max_history_cycles(),
        });
    }
    Ok(())
}

/// Resamples a per-cycle series (index = cycle) on the input grid ending at
/// `present` and left-pads it to `input_len`.
pub fn history_window(series: &[f64], present: usize, config: &ModelConfig) -> Result<PaddedInput> {
    check_history(present, config)?;
    if present >= series.len() {
        return Err(Error::invalid(format!(
            "present cycle {present} beyond series of {} cycles",
            series.len()
        )));
    }
    let step = config.in_step_cycles;
    let m = input_steps(present, step);
    let real: Vec<f64> = (0..m)
        .map(|i| series[present - step * (m - 1 - i)])
        .collect();
    PaddedInput::pad_front(&real, config.input_len)
}
