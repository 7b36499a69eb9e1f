use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest history, in cycles, the forecaster accepts.
pub const MIN_HISTORY_CYCLES: usize = 100;

/// Shape of the recurrent stacks and the time grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    /// Input timesteps (leading positions padded).
    pub input_len: usize,
    /// Output timesteps.
    pub output_len: usize,
    /// 2 for the multi-task model, 1 for a single-task model.
    pub input_channels: usize,
    pub in_step_cycles: usize,
    pub out_step_cycles: usize,
}

impl Default for ModelConfig {
    /// Four bidirectional layers of 64 units, 384 input steps of 5 cycles and
    /// 128 output steps of 20 cycles.
    fn default() -> Self {
        Self {
            num_layers: 4,
            hidden_size: 64,
            input_len: 384,
            output_len: 128,
            input_channels: 2,
            in_step_cycles: 5,
            out_step_cycles: 20,
        }
    }
}

impl ModelConfig {
    /// Small configuration that trains in minutes on one core.
    pub fn desk() -> Self {
        Self {
            num_layers: 2,
            hidden_size: 8,
            input_len: 96,
            output_len: 48,
            input_channels: 2,
            in_step_cycles: 20,
            out_step_cycles: 40,
        }
    }

    pub fn with_channels(mut self, channels: usize) -> Self {
        self.input_channels = channels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("input_len", self.input_len),
            ("output_len", self.output_len),
            ("input_channels", self.input_channels),
            ("in_step_cycles", self.in_step_cycles),
            ("out_step_cycles", self.out_step_cycles),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be > 0")));
            }
        }
        if self.input_channels > 2 {
            return Err(Error::Config("input_channels must be 1 or 2".into()));
        }
        if self.hidden_size < 2 {
            return Err(Error::Config("hidden_size must be >= 2".into()));
        }
        if self.max_history_cycles() < MIN_HISTORY_CYCLES {
            return Err(Error::Config(format!(
                "input window covers {} cycles, less than the {MIN_HISTORY_CYCLES}-cycle minimum history",
                self.max_history_cycles()
            )));
        }
        Ok(())
    }

    /// Longest history the input window can hold.
    pub fn max_history_cycles(&self) -> usize {
        self.input_len * self.in_step_cycles
    }

    /// Cycles spanned by a full output sequence.
    pub fn horizon_cycles(&self) -> usize {
        self.output_len * self.out_step_cycles
    }

    /// Width of the encoder summary vector.
    pub fn context_size(&self) -> usize {
        2 * self.hidden_size
    }

    /// Fully connected head widths: `2h -> h -> h/2 -> 1`.
    pub fn head_sizes(&self) -> [usize; 4] {
        let h = self.hidden_size;
        [2 * h, h, (h / 2).max(1), 1]
    }
}

/// Which degradation trajectory a branch produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Capacity,
    Resistance,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Capacity, Channel::Resistance];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Capacity => "capacity",
            Channel::Resistance => "resistance",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "capacity" | "cap" => Ok(Channel::Capacity),
            "resistance" | "res" => Ok(Channel::Resistance),
            other => Err(Error::invalid(format!("unknown branch `{other}`"))),
        }
    }
}
