//! The multi-task forecaster (shared encoder, capacity and resistance
//! decoders) and its single-task counterpart.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataprep::Normalizer;
use crate::error::{check_len, Error, Result};
use crate::numeric::{join, ParamSet, RegularizationSpec, SeededRng};
use crate::seqmodel::input::{history_window, mask_channels, MaskedSequence, PaddedInput};
use crate::seqmodel::layers::BiLstmStack;
use crate::seqmodel::network::{self, Decoder};
use crate::seqmodel::{Channel, ModelConfig};

/// Standalone predictions stop where SOH-C drops below this.
pub const SOH_C_FLOOR: f64 = 0.4;
/// Standalone predictions stop where SOH-R rises above this.
pub const SOH_R_CEIL: f64 = 2.0;

/// Learnable tensors of the multi-task model, in flat-layout order:
/// encoder, capacity decoder, resistance decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct MtlParams {
    pub encoder: BiLstmStack,
    pub cap: Decoder,
    pub res: Decoder,
}

impl MtlParams {
    pub fn init(config: &ModelConfig, rng: &mut SeededRng) -> Self {
        let encoder = BiLstmStack::init(
            config.input_channels,
            config.hidden_size,
            config.num_layers,
            rng,
        );
        let cap = Decoder::init(config, rng);
        let res = Decoder::init(config, rng);
        Self { encoder, cap, res }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            encoder: BiLstmStack::zeros(
                config.input_channels,
                config.hidden_size,
                config.num_layers,
            ),
            cap: Decoder::zeros(config),
            res: Decoder::zeros(config),
        }
    }

    pub fn decoder(&self, channel: Channel) -> &Decoder {
        match channel {
            Channel::Capacity => &self.cap,
            Channel::Resistance => &self.res,
        }
    }

    pub fn decoder_mut(&mut self, channel: Channel) -> &mut Decoder {
        match channel {
            Channel::Capacity => &mut self.cap,
            Channel::Resistance => &mut self.res,
        }
    }

    pub fn encoder_range(&self) -> Range<usize> {
        0..self.encoder.num_params()
    }

    pub fn decoder_range(&self, channel: Channel) -> Range<usize> {
        let e = self.encoder.num_params();
        let c = self.cap.num_params();
        match channel {
            Channel::Capacity => e..e + c,
            Channel::Resistance => e + c..e + c + self.res.num_params(),
        }
    }
}

impl ParamSet for MtlParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.cap.visit(&join(prefix, "decoder_cap"), f);
        self.res.visit(&join(prefix, "decoder_res"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.cap.visit_mut(f);
        self.res.visit_mut(f);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MtlModel {
    pub config: ModelConfig,
    pub normalizer: Normalizer,
    pub reg: RegularizationSpec,
    pub params: MtlParams,
}

/// Predicted SOH trajectories; step `k` is at cycle `present + (k + 1) * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPrediction {
    /// SOH-C per output step.
    pub capacity: Vec<f64>,
    /// SOH-R per output step.
    pub resistance: Vec<f64>,
    /// Cycle of the first output step.
    pub start_cycle: usize,
    pub step_cycles: usize,
}

impl TrajectoryPrediction {
    pub fn len(&self) -> usize {
        self.capacity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.capacity.is_empty()
    }

    pub fn cycle_at(&self, k: usize) -> usize {
        self.start_cycle + k * self.step_cycles
    }

    pub fn cycles(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.cycle_at(k) as f64).collect()
    }

    pub fn channel(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Capacity => &self.capacity,
            Channel::Resistance => &self.resistance,
        }
    }

    /// Number of leading steps inside the plausibility bounds.
    pub fn plausible_len(&self) -> usize {
        self.capacity
            .iter()
            .zip(&self.resistance)
            .position(|(&c, &r)| c < SOH_C_FLOOR || r > SOH_R_CEIL)
            .unwrap_or(self.len())
    }

    pub fn truncated(&self, len: usize) -> Self {
        let len = len.min(self.len());
        Self {
            capacity: self.capacity[..len].to_vec(),
            resistance: self.resistance[..len].to_vec(),
            start_cycle: self.start_cycle,
            step_cycles: self.step_cycles,
        }
    }

    /// Prediction cut where either channel leaves the plausible range.
    pub fn clipped(&self) -> Self {
        self.truncated(self.plausible_len())
    }
}

/// Pass counts of one prediction call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ForwardTrace {
    pub encoder_passes: usize,
    pub decoder_passes: usize,
}

/// Anything that forecasts both trajectories from per-cycle history.
pub trait Forecaster {
    /// `cap_ah` and `res_mohm` hold one value per cycle from 0 to the present.
    fn forecast(&self, cap_ah: &[f64], res_mohm: &[f64]) -> Result<TrajectoryPrediction>;
}

impl MtlModel {
    pub fn new(
        config: ModelConfig,
        normalizer: Normalizer,
        reg: RegularizationSpec,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if config.input_channels != 2 {
            return Err(Error::Config(
                "the multi-task model takes 2 input channels".into(),
            ));
        }
        let mut rng = SeededRng::new(seed).split("mtl-init");
        Ok(Self {
            config,
            normalizer,
            reg,
            params: MtlParams::init(&config, &mut rng),
        })
    }

    pub fn zeros(config: ModelConfig, normalizer: Normalizer) -> Self {
        Self {
            config,
            normalizer,
            reg: RegularizationSpec::default(),
            params: MtlParams::zeros(&config),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn encode(&self, seq: &MaskedSequence) -> Result<Vec<f64>> {
        network::encode(&self.params.encoder, &seq.steps)
    }

    pub fn decode(&self, context: &[f64], branch: Channel) -> Result<Vec<f64>> {
        self.params
            .decoder(branch)
            .forward(context, self.config.output_len)
    }

    /// Normalized, resampled and padded input windows for a per-cycle history.
    pub fn input_windows(
        &self,
        cap_ah: &[f64],
        res_mohm: &[f64],
    ) -> Result<(PaddedInput, PaddedInput)> {
        check_len("resistance history", cap_ah.len(), res_mohm.len())?;
        if cap_ah.is_empty() {
            return Err(Error::EmptyInput);
        }
        let present = cap_ah.len() - 1;
        let cap = self.normalizer.normalize(Channel::Capacity, cap_ah);
        let res = self.normalizer.normalize(Channel::Resistance, res_mohm);
        Ok((
            history_window(&cap, present, &self.config)?,
            history_window(&res, present, &self.config)?,
        ))
    }

    /// One-shot forecast from padded windows.
    pub fn predict_windows(
        &self,
        cap: &PaddedInput,
        res: &PaddedInput,
        present: usize,
    ) -> Result<TrajectoryPrediction> {
        Ok(self.predict_windows_traced(cap, res, present)?.0)
    }

    fn predict_windows_traced(
        &self,
        cap: &PaddedInput,
        res: &PaddedInput,
        present: usize,
    ) -> Result<(TrajectoryPrediction, ForwardTrace)> {
        let seq = mask_channels(&[cap, res])?;
        let context = self.encode(&seq)?;
        let capacity = self.decode(&context, Channel::Capacity)?;
        let resistance = self.decode(&context, Channel::Resistance)?;
        let trace = ForwardTrace {
            encoder_passes: 1,
            decoder_passes: 2,
        };
        Ok((
            TrajectoryPrediction {
                capacity,
                resistance,
                start_cycle: present + self.config.out_step_cycles,
                step_cycles: self.config.out_step_cycles,
            },
            trace,
        ))
    }

    /// Full-length forecast from per-cycle physical history (Ah, mΩ).
    pub fn predict(&self, cap_ah: &[f64], res_mohm: &[f64]) -> Result<TrajectoryPrediction> {
        Ok(self.predict_traced(cap_ah, res_mohm)?.0)
    }

    pub fn predict_traced(
        &self,
        cap_ah: &[f64],
        res_mohm: &[f64],
    ) -> Result<(TrajectoryPrediction, ForwardTrace)> {
        let (cap, res) = self.input_windows(cap_ah, res_mohm)?;
        self.predict_windows_traced(&cap, &res, cap_ah.len() - 1)
    }
}

impl Forecaster for MtlModel {
    fn forecast(&self, cap_ah: &[f64], res_mohm: &[f64]) -> Result<TrajectoryPrediction> {
        self.predict(cap_ah, res_mohm)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StlParams {
    pub encoder: BiLstmStack,
    pub decoder: Decoder,
}

impl ParamSet for StlParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.decoder.visit(&join(prefix, "decoder"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.encoder.visit_mut(f);
        self.decoder.visit_mut(f);
    }
}

/// Single-task forecaster: one channel in, the same channel out.
#[derive(Clone, Debug, PartialEq)]
pub struct StlModel {
    pub config: ModelConfig,
    pub channel: Channel,
    pub normalizer: Normalizer,
    pub reg: RegularizationSpec,
    pub params: StlParams,
}

/// One predicted SOH trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleTrajectory {
    pub channel: Channel,
    pub values: Vec<f64>,
    /// Cycle of the first output step.
    pub start_cycle: usize,
    pub step_cycles: usize,
}

impl SingleTrajectory {
    pub fn plausible_len(&self) -> usize {
        self.values
            .iter()
            .position(|&v| match self.channel {
                Channel::Capacity => v < SOH_C_FLOOR,
                Channel::Resistance => v > SOH_R_CEIL,
            })
            .unwrap_or(self.values.len())
    }
}

impl StlModel {
    pub fn new(
        config: ModelConfig,
        channel: Channel,
        normalizer: Normalizer,
        reg: RegularizationSpec,
        seed: u64,
    ) -> Result<Self> {
        let config = config.with_channels(1);
        config.validate()?;
        let mut rng = SeededRng::new(seed).split(&format!("stl-init-{channel}"));
        let encoder = BiLstmStack::init(1, config.hidden_size, config.num_layers, &mut rng);
        let decoder = Decoder::init(&config, &mut rng);
        Ok(Self {
            config,
            channel,
            normalizer,
            reg,
            params: StlParams { encoder, decoder },
        })
    }

    pub fn zeros(config: ModelConfig, channel: Channel, normalizer: Normalizer) -> Self {
        let config = config.with_channels(1);
        Self {
            config,
            channel,
            normalizer,
            reg: RegularizationSpec::default(),
            params: StlParams {
                encoder: BiLstmStack::zeros(1, config.hidden_size, config.num_layers),
                decoder: Decoder::zeros(&config),
            },
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.num_params()
    }

    pub fn predict_window(&self, window: &PaddedInput, present: usize) -> Result<SingleTrajectory> {
        let seq = mask_channels(&[window])?;
        let context = network::encode(&self.params.encoder, &seq.steps)?;
        let values = self
            .params
            .decoder
            .forward(&context, self.config.output_len)?;
        Ok(SingleTrajectory {
            channel: self.channel,
            values,
            start_cycle: present + self.config.out_step_cycles,
            step_cycles: self.config.out_step_cycles,
        })
    }

    /// Full-length forecast from a per-cycle physical history of this model's channel.
    pub fn predict(&self, history: &[f64]) -> Result<SingleTrajectory> {
        if history.is_empty() {
            return Err(Error::EmptyInput);
        }
        let present = history.len() - 1;
        let soh = self.normalizer.normalize(self.channel, history);
        let window = history_window(&soh, present, &self.config)?;
        self.predict_window(&window, present)
    }
}

/// A capacity and a resistance single-task model used together.
#[derive(Clone, Debug)]
pub struct StlPair {
    pub cap: StlModel,
    pub res: StlModel,
}

impl Forecaster for StlPair {
    fn forecast(&self, cap_ah: &[f64], res_mohm: &[f64]) -> Result<TrajectoryPrediction> {
        let c = self.cap.predict(cap_ah)?;
        let r = self.res.predict(res_mohm)?;
        Ok(TrajectoryPrediction {
            capacity: c.values,
            resistance: r.values,
            start_cycle: c.start_cycle,
            step_cycles: c.step_cycles,
        })
    }
}

/// Forecast of a single STL model from its own history.
pub fn stl_predict(history: &[f64], model: &StlModel) -> Result<SingleTrajectory> {
    model.predict(history)
}
