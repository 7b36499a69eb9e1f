//! Run configuration: a TOML file whose every field has a default, with
//! command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataprep::SynthParams;
use crate::error::{Error, Result};
use crate::evaluation::{EolThresholds, NOISE_GRID};
use crate::seqmodel::{Channel, ModelConfig};
use crate::training::{Schedule, StageConfig, SAMPLE_STRIDE_CYCLES};

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_FLEET_SIZE: usize = 48;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Full-size network and schedules.
    #[default]
    Reference,
    /// Small network and short schedules that train in minutes.
    Desk,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Preset network with per-field overrides.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    pub num_layers: Option<usize>,
    pub hidden_size: Option<usize>,
    pub input_len: Option<usize>,
    pub output_len: Option<usize>,
    pub in_step_cycles: Option<usize>,
    pub out_step_cycles: Option<usize>,
}

/// Preset schedules; explicit stage lists replace them wholesale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub preset: Preset,
    pub mtl_stages: Option<Vec<StageConfig>>,
    /// Single stage list shared by both single-task models; loss weights are
    /// set from the channel.
    pub stl_stages: Option<Vec<StageConfig>>,
    pub sample_stride: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            preset: Preset::default(),
            mtl_stages: None,
            stl_stages: None,
            sample_stride: SAMPLE_STRIDE_CYCLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub grid: Vec<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            grid: NOISE_GRID.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_cells: usize,
    pub params: SynthParams,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            n_cells: DEFAULT_FLEET_SIZE,
            params: SynthParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub warmup: usize,
    pub repetitions: usize,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            warmup: 10,
            repetitions: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed; every random stream is split from it.
    pub seed: u64,
    pub paths: Paths,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub noise: NoiseSection,
    pub thresholds: EolThresholds,
    pub synth: SynthSection,
    pub timing: TimingSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            paths: Paths::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
            noise: NoiseSection::default(),
            thresholds: EolThresholds::default(),
            synth: SynthSection::default(),
            timing: TimingSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_config(&self) -> ModelConfig {
        let m = &self.model;
        let mut c = match m.preset {
            Preset::Reference => ModelConfig::default(),
            Preset::Desk => ModelConfig::desk(),
        };
        let set = |slot: &mut usize, v: Option<usize>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.num_layers, m.num_layers);
        set(&mut c.hidden_size, m.hidden_size);
        set(&mut c.input_len, m.input_len);
        set(&mut c.output_len, m.output_len);
        set(&mut c.in_step_cycles, m.in_step_cycles);
        set(&mut c.out_step_cycles, m.out_step_cycles);
        c
    }

    pub fn mtl_schedule(&self) -> Schedule {
        match (&self.training.mtl_stages, self.training.preset) {
            (Some(stages), _) => Schedule {
                stages: stages.clone(),
            },
            (None, Preset::Reference) => Schedule::mtl_reference(),
            (None, Preset::Desk) => Schedule::mtl_desk(),
        }
    }

    pub fn stl_schedule(&self, channel: Channel) -> Schedule {
        match (&self.training.stl_stages, self.training.preset) {
            (Some(stages), _) => {
                let weights = Schedule::stl_reference(channel).stages[0].loss_weights;
                let stages = stages
                    .iter()
                    .map(|s| StageConfig {
                        loss_weights: weights,
                        ..s.clone()
                    })
                    .collect();
                Schedule { stages }
            }
            (None, Preset::Reference) => Schedule::stl_reference(channel),
            (None, Preset::Desk) => Schedule::stl_desk(channel),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model_config().validate()?;
        self.mtl_schedule().validate()?;
        for ch in Channel::BOTH {
            self.stl_schedule(ch).validate()?;
        }
        self.thresholds.validate()?;
        self.synth.params.validate()?;
        if self.synth.n_cells == 0 {
            return Err(Error::Config("synth.n_cells must be >= 1".into()));
        }
        if self.training.sample_stride == 0 {
            return Err(Error::Config("training.sample_stride must be >= 1".into()));
        }
        if self.noise.grid.is_empty()
            || self
                .noise
                .grid
                .iter()
                .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return Err(Error::Config("noise.grid needs finite values >= 0".into()));
        }
        if self.timing.repetitions == 0 {
            return Err(Error::Config("timing.repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, excluding paths so that the same
    /// experiment in another directory hashes the same.
    pub fn hash(&self) -> String {
        let canonical = RunConfig {
            paths: Paths::default(),
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
