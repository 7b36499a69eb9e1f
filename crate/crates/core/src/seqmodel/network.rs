//! Encoder and decoder building blocks shared by the multi- and single-task
//! models.

use crate::error::{check_len, Result};
use crate::numeric::{join, Matrix2D, ParamSet, SeededRng};
use crate::seqmodel::layers::{BiLstmStack, Head, HeadCache, StackCache};
use crate::seqmodel::ModelConfig;

/// Initial bias of the last head layer: outputs start at the SOH reference level.
pub const HEAD_OUTPUT_BIAS: f64 = 1.0;

/// Summary vector of the top encoder layer: the forward state at the last
/// step joined with the backward state at the first step.
fn context_of(top: &Matrix2D) -> Vec<f64> {
    let h = top.cols() / 2;
    let mut c = top.row(top.rows() - 1)[..h].to_vec();
    c.extend_from_slice(&top.row(0)[h..]);
    c
}

#[derive(Debug)]
pub struct EncoderCache {
    stack: StackCache,
    steps: usize,
}

pub fn encode(encoder: &BiLstmStack, seq: &Matrix2D) -> Result<Vec<f64>> {
    check_len("encoder input channels", encoder.input_size(), seq.cols())?;
    if seq.rows() == 0 {
        return Err(crate::error::Error::EmptyInput);
    }
    Ok(context_of(&encoder.forward(seq)))
}

pub fn encode_cached(encoder: &BiLstmStack, seq: &Matrix2D) -> Result<(Vec<f64>, EncoderCache)> {
    check_len("encoder input channels", encoder.input_size(), seq.cols())?;
    if seq.rows() == 0 {
        return Err(crate::error::Error::EmptyInput);
    }
    let (top, stack) = encoder.forward_cached(seq);
    Ok((
        context_of(&top),
        EncoderCache {
            stack,
            steps: seq.rows(),
        },
    ))
}

pub fn encode_backward(
    encoder: &BiLstmStack,
    cache: &EncoderCache,
    d_context: &[f64],
    grads: &mut BiLstmStack,
) {
    let h = encoder.hidden_size();
    let mut d_top = Matrix2D::zeros(cache.steps, 2 * h);
    d_top.row_mut(cache.steps - 1)[..h].copy_from_slice(&d_context[..h]);
    for (a, b) in d_top.row_mut(0)[h..].iter_mut().zip(&d_context[h..]) {
        *a += b;
    }
    encoder.backward(&cache.stack, &d_top, grads);
}

/// Repeat-vector decoder: the context is fed at every output step through a
/// bidirectional stack with zero initial state, then through the head.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoder {
    pub stack: BiLstmStack,
    pub head: Head,
}

#[derive(Debug)]
pub struct DecoderCache {
    stack: StackCache,
    head: HeadCache,
}

impl Decoder {
    pub fn init(config: &ModelConfig, rng: &mut SeededRng) -> Self {
        let h = config.hidden_size;
        Self {
            stack: BiLstmStack::init(2 * h, h, config.num_layers, rng),
            head: Head::init(config.head_sizes(), HEAD_OUTPUT_BIAS, rng),
        }
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        let h = config.hidden_size;
        Self {
            stack: BiLstmStack::zeros(2 * h, h, config.num_layers),
            head: Head::zeros(config.head_sizes()),
        }
    }

    fn repeat(context: &[f64], output_len: usize) -> Matrix2D {
        let mut m = Matrix2D::zeros(output_len, context.len());
        for t in 0..output_len {
            m.row_mut(t).copy_from_slice(context);
        }
        m
    }

    pub fn forward(&self, context: &[f64], output_len: usize) -> Result<Vec<f64>> {
        check_len("decoder context", self.stack.input_size(), context.len())?;
        let top = self.stack.forward(&Self::repeat(context, output_len));
        Ok(self.head.forward(&top))
    }

    pub fn forward_cached(
        &self,
        context: &[f64],
        output_len: usize,
    ) -> Result<(Vec<f64>, DecoderCache)> {
        check_len("decoder context", self.stack.input_size(), context.len())?;
        let (top, stack) = self
            .stack
            .forward_cached(&Self::repeat(context, output_len));
        let (out, head) = self.head.forward_cached(&top);
        Ok((out, DecoderCache { stack, head }))
    }

    /// Returns the gradient w.r.t. the context vector.
    pub fn backward(&self, cache: &DecoderCache, d_out: &[f64], grads: &mut Decoder) -> Vec<f64> {
        let d_top = self.head.backward(&cache.head, d_out, &mut grads.head);
        let d_in = self.stack.backward(&cache.stack, &d_top, &mut grads.stack);
        let mut d_context = vec![0.0; d_in.cols()];
        for t in 0..d_in.rows() {
            for (a, b) in d_context.iter_mut().zip(d_in.row(t)) {
                *a += b;
            }
        }
        d_context
    }
}

impl ParamSet for Decoder {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        self.stack.visit(&join(prefix, "lstm"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        self.stack.visit_mut(f);
        self.head.visit_mut(f);
    }
}
