//! Per-sample loss and gradient for the trainable models.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::loss::{masked_mae, masked_mae_grad};
use super::samples::TrainingSample;
use crate::error::{Error, Result};
use crate::numeric::{regularization, ParamSet, RegularizationSpec};
use crate::seqmodel::{
    encode_backward, encode_cached, mask_channels, BiLstmStack, Channel, Decoder, MtlModel,
    MtlParams, StlModel, StlParams,
};

/// Parameters a stage updates; each maps to a contiguous range of the flat
/// layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSubset {
    EncoderCap,
    ResDecoder,
    All,
}

impl ParamSubset {
    pub fn includes_encoder(self) -> bool {
        !matches!(self, ParamSubset::ResDecoder)
    }
}

/// Loss weights `[w_cap, w_res]`.
pub type LossWeights = [f64; 2];

fn weight(weights: LossWeights, channel: Channel) -> f64 {
    match channel {
        Channel::Capacity => weights[0],
        Channel::Resistance => weights[1],
    }
}

/// A model the stage trainer can optimize.
pub trait TrainModel: Clone {
    type Grads: ParamSet;

    fn params_flat(&self) -> Vec<f64>;
    fn set_params_flat(&mut self, flat: &[f64]);
    fn zero_grads(&self) -> Self::Grads;
    fn subset_range(&self, subset: ParamSubset) -> Result<Range<usize>>;
    fn reg(&self) -> RegularizationSpec;
    /// Encoder output for a sample.
    fn context(&self, sample: &TrainingSample) -> Result<Vec<f64>>;
    /// Weighted data loss of one sample. `context` skips the encoder.
    fn sample_loss(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        context: Option<&[f64]>,
    ) -> Result<f64>;
    /// Adds `scale` times the gradient of the weighted data loss to `grads`
    /// and returns the loss. The encoder gradient is skipped when `context`
    /// is given.
    fn accumulate_grad(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        scale: f64,
        context: Option<&[f64]>,
        grads: &mut Self::Grads,
    ) -> Result<f64>;
}

#[allow(clippy::too_many_arguments)]
fn decoder_term(
    dec: &Decoder,
    grads: Option<&mut Decoder>,
    context: &[f64],
    target: &[f64],
    mask: &[bool],
    w: f64,
    scale: f64,
    d_context: &mut [f64],
) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    match grads {
        None => {
            let out = dec.forward(context, target.len())?;
            Ok(w * masked_mae(&out, target, mask)?)
        }
        Some(g) => {
            let (out, cache) = dec.forward_cached(context, target.len())?;
            let (loss, mut d_out) = masked_mae_grad(&out, target, mask)?;
            d_out.iter_mut().for_each(|v| *v *= w * scale);
            for (a, b) in d_context.iter_mut().zip(dec.backward(&cache, &d_out, g)) {
                *a += b;
            }
            Ok(w * loss)
        }
    }
}

/// Runs encoder (unless `context` is given) and the weighted decoders.
/// With `grads`, backpropagates into them.
#[allow(clippy::too_many_arguments)]
fn run_sample(
    encoder: &BiLstmStack,
    inputs: &[&crate::seqmodel::PaddedInput],
    heads: Vec<(Channel, &Decoder, Option<&mut Decoder>)>,
    enc_grads: Option<&mut BiLstmStack>,
    sample: &TrainingSample,
    weights: LossWeights,
    scale: f64,
    context: Option<&[f64]>,
) -> Result<f64> {
    let backprop = heads.iter().any(|h| h.2.is_some());
    let (ctx, cache) = match context {
        Some(c) => (c.to_vec(), None),
        None => {
            let seq = mask_channels(inputs)?;
            if backprop && enc_grads.is_some() {
                let (c, cache) = encode_cached(encoder, &seq.steps)?;
                (c, Some(cache))
            } else {
                (crate::seqmodel::encode(encoder, &seq.steps)?, None)
            }
        }
    };
    let mut d_ctx = vec![0.0; ctx.len()];
    let mut loss = 0.0;
    for (ch, dec, g) in heads {
        loss += decoder_term(
            dec,
            g,
            &ctx,
            sample.target(ch),
            &sample.target_mask,
            weight(weights, ch),
            scale,
            &mut d_ctx,
        )?;
    }
    if let (Some(cache), Some(eg)) = (cache, enc_grads) {
        encode_backward(encoder, &cache, &d_ctx, eg);
    }
    Ok(loss)
}

impl TrainModel for MtlModel {
    type Grads = MtlParams;

    fn params_flat(&self) -> Vec<f64> {
        self.params.flatten()
    }

    fn set_params_flat(&mut self, flat: &[f64]) {
        self.params.unflatten(flat);
    }

    fn zero_grads(&self) -> MtlParams {
        MtlParams::zeros(&self.config)
    }

    fn subset_range(&self, subset: ParamSubset) -> Result<Range<usize>> {
        let cap = self.params.decoder_range(Channel::Capacity);
        let res = self.params.decoder_range(Channel::Resistance);
        Ok(match subset {
            ParamSubset::EncoderCap => 0..cap.end,
            ParamSubset::ResDecoder => res,
            ParamSubset::All => 0..res.end,
        })
    }

    fn reg(&self) -> RegularizationSpec {
        self.reg
    }

    fn context(&self, sample: &TrainingSample) -> Result<Vec<f64>> {
        self.encode(&mask_channels(&[&sample.cap_input, &sample.res_input])?)
    }

    fn sample_loss(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        context: Option<&[f64]>,
    ) -> Result<f64> {
        let p = &self.params;
        run_sample(
            &p.encoder,
            &[&sample.cap_input, &sample.res_input],
            vec![
                (Channel::Capacity, &p.cap, None),
                (Channel::Resistance, &p.res, None),
            ],
            None,
            sample,
            weights,
            1.0,
            context,
        )
    }

    fn accumulate_grad(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        scale: f64,
        context: Option<&[f64]>,
        grads: &mut MtlParams,
    ) -> Result<f64> {
        let p = &self.params;
        let MtlParams { encoder, cap, res } = grads;
        run_sample(
            &p.encoder,
            &[&sample.cap_input, &sample.res_input],
            vec![
                (Channel::Capacity, &p.cap, Some(cap)),
                (Channel::Resistance, &p.res, Some(res)),
            ],
            Some(encoder),
            sample,
            weights,
            scale,
            context,
        )
    }
}

impl TrainModel for StlModel {
    type Grads = StlParams;

    fn params_flat(&self) -> Vec<f64> {
        self.params.flatten()
    }

    fn set_params_flat(&mut self, flat: &[f64]) {
        self.params.unflatten(flat);
    }

    fn zero_grads(&self) -> StlParams {
        StlModel::zeros(self.config, self.channel, self.normalizer).params
    }

    fn subset_range(&self, subset: ParamSubset) -> Result<Range<usize>> {
        match subset {
            ParamSubset::All => Ok(0..self.params.num_params()),
            other => Err(Error::Config(format!(
                "single-task models train all parameters, not {other:?}"
            ))),
        }
    }

    fn reg(&self) -> RegularizationSpec {
        self.reg
    }

    fn context(&self, sample: &TrainingSample) -> Result<Vec<f64>> {
        let seq = mask_channels(&[sample.input(self.channel)])?;
        crate::seqmodel::encode(&self.params.encoder, &seq.steps)
    }

    fn sample_loss(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        context: Option<&[f64]>,
    ) -> Result<f64> {
        run_sample(
            &self.params.encoder,
            &[sample.input(self.channel)],
            vec![(self.channel, &self.params.decoder, None)],
            None,
            sample,
            weights,
            1.0,
            context,
        )
    }

    fn accumulate_grad(
        &self,
        sample: &TrainingSample,
        weights: LossWeights,
        scale: f64,
        context: Option<&[f64]>,
        grads: &mut StlParams,
    ) -> Result<f64> {
        let StlParams { encoder, decoder } = grads;
        run_sample(
            &self.params.encoder,
            &[sample.input(self.channel)],
            vec![(self.channel, &self.params.decoder, Some(decoder))],
            Some(encoder),
            sample,
            weights,
            scale,
            context,
        )
    }
}

/// Mean weighted data loss over `samples` plus the penalty on `subset`.
pub fn objective<M: TrainModel>(
    model: &M,
    samples: &[TrainingSample],
    weights: LossWeights,
    subset: ParamSubset,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut data = 0.0;
    for s in samples {
        data += model.sample_loss(s, weights, None)?;
    }
    let flat = model.params_flat();
    let (penalty, _) = regularization(&flat[model.subset_range(subset)?], &model.reg())?;
    Ok(data / samples.len() as f64 + penalty)
}

/// [`objective`] and its gradient over the full flat layout; entries outside
/// `subset` are zero.
pub fn objective_grad<M: TrainModel>(
    model: &M,
    samples: &[TrainingSample],
    weights: LossWeights,
    subset: ParamSubset,
) -> Result<(f64, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let range = model.subset_range(subset)?;
    let scale = 1.0 / samples.len() as f64;
    let mut grads = model.zero_grads();
    let mut data = 0.0;
    for s in samples {
        data += model.accumulate_grad(s, weights, scale, None, &mut grads)?;
    }
    let mut g = grads.flatten();
    g[..range.start].iter_mut().for_each(|v| *v = 0.0);
    g[range.end..].iter_mut().for_each(|v| *v = 0.0);
    let flat = model.params_flat();
    let penalty =
        crate::numeric::regularization_acc(&flat[range.clone()], &model.reg(), &mut g[range])?;
    Ok((data * scale + penalty, g))
}
