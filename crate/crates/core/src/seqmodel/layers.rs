//! Bidirectional LSTM stacks and the per-timestep fully connected head.

use crate::numeric::{
    join, lstm_backward_unchecked, lstm_forward_unchecked, LstmCache, LstmCellParams, Matrix2D,
    ParamSet, SeededRng,
};

#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmLayer {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

/// Layer 0 reads the input features; deeper layers read the `2h`
/// concatenation of the two directions below them.
#[derive(Clone, Debug, PartialEq)]
pub struct BiLstmStack {
    pub layers: Vec<BiLstmLayer>,
}

#[derive(Debug)]
struct LayerCache {
    fwd: Vec<LstmCache>,
    /// Processing order, i.e. reversed time.
    bwd: Vec<LstmCache>,
}

#[derive(Debug)]
pub struct StackCache {
    layers: Vec<LayerCache>,
}

impl BiLstmLayer {
    fn forward(&self, input: &Matrix2D, keep_cache: bool) -> (Matrix2D, Option<LayerCache>) {
        let steps = input.rows();
        let h = self.fwd.hidden_size();
        let mut out = Matrix2D::zeros(steps, 2 * h);
        let mut fwd_cache = Vec::with_capacity(if keep_cache { steps } else { 0 });
        let mut bwd_cache = Vec::with_capacity(if keep_cache { steps } else { 0 });

        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        for t in 0..steps {
            let (hn, cn, cache) = lstm_forward_unchecked(input.row(t), &hs, &cs, &self.fwd);
            out.row_mut(t)[..h].copy_from_slice(&hn);
            hs = hn;
            cs = cn;
            if keep_cache {
                fwd_cache.push(cache);
            }
        }
        let (mut hs, mut cs) = (vec![0.0; h], vec![0.0; h]);
        for t in (0..steps).rev() {
            let (hn, cn, cache) = lstm_forward_unchecked(input.row(t), &hs, &cs, &self.bwd);
            out.row_mut(t)[h..].copy_from_slice(&hn);
            hs = hn;
            cs = cn;
            if keep_cache {
                bwd_cache.push(cache);
            }
        }
        let cache = keep_cache.then_some(LayerCache {
            fwd: fwd_cache,
            bwd: bwd_cache,
        });
        (out, cache)
    }

    fn backward(&self, cache: &LayerCache, d_out: &Matrix2D, grads: &mut BiLstmLayer) -> Matrix2D {
        let steps = d_out.rows();
        let h = self.fwd.hidden_size();
        let mut d_in = Matrix2D::zeros(steps, self.fwd.input_size());

        let (mut dh_next, mut dc_next) = (vec![0.0; h], vec![0.0; h]);
        for t in (0..steps).rev() {
            let dh: Vec<f64> = d_out.row(t)[..h]
                .iter()
                .zip(&dh_next)
                .map(|(a, b)| a + b)
                .collect();
            let r =
                lstm_backward_unchecked(&self.fwd, &cache.fwd[t], &dh, &dc_next, &mut grads.fwd);
            for (a, b) in d_in.row_mut(t).iter_mut().zip(&r.grad_x) {
                *a += b;
            }
            dh_next = r.grad_h_prev;
            dc_next = r.grad_c_prev;
        }

        let (mut dh_next, mut dc_next) = (vec![0.0; h], vec![0.0; h]);
        for k in (0..steps).rev() {
            let t = steps - 1 - k;
            let dh: Vec<f64> = d_out.row(t)[h..]
                .iter()
                .zip(&dh_next)
                .map(|(a, b)| a + b)
                .collect();
            let r =
                lstm_backward_unchecked(&self.bwd, &cache.bwd[k], &dh, &dc_next, &mut grads.bwd);
            for (a, b) in d_in.row_mut(t).iter_mut().zip(&r.grad_x) {
                *a += b;
            }
            dh_next = r.grad_h_prev;
            dc_next = r.grad_c_prev;
        }
        d_in
    }
}

impl BiLstmStack {
    pub fn init(
        input_size: usize,
        hidden_size: usize,
        num_layers: usize,
        rng: &mut SeededRng,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input_size } else { 2 * hidden_size };
                BiLstmLayer {
                    fwd: LstmCellParams::init(d, hidden_size, rng),
                    bwd: LstmCellParams::init(d, hidden_size, rng),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(input_size: usize, hidden_size: usize, num_layers: usize) -> Self {
        let layers = (0..num_layers)
            .map(|l| {
                let d = if l == 0 { input_size } else { 2 * hidden_size };
                BiLstmLayer {
                    fwd: LstmCellParams::zeros(d, hidden_size),
                    bwd: LstmCellParams::zeros(d, hidden_size),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].fwd.input_size()
    }

    pub fn hidden_size(&self) -> usize {
        self.layers[0].fwd.hidden_size()
    }

    /// Top-layer outputs, one `2h` row per timestep.
    pub fn forward(&self, input: &Matrix2D) -> Matrix2D {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x, false).0;
        }
        x
    }

    pub fn forward_cached(&self, input: &Matrix2D) -> (Matrix2D, StackCache) {
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, c) = layer.forward(&x, true);
            caches.push(c.expect("cache requested"));
            x = y;
        }
        (x, StackCache { layers: caches })
    }

    /// Accumulates parameter gradients and returns the gradient w.r.t. the input.
    pub fn backward(
        &self,
        cache: &StackCache,
        d_out: &Matrix2D,
        grads: &mut BiLstmStack,
    ) -> Matrix2D {
        let mut d = d_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            d = layer.backward(&cache.layers[l], &d, &mut grads.layers[l]);
        }
        d
    }
}

impl ParamSet for BiLstmStack {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            layer.fwd.visit(&join(prefix, &format!("l{l}.fwd")), f);
            layer.bwd.visit(&join(prefix, &format!("l{l}.bwd")), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            layer.fwd.visit_mut(f);
            layer.bwd.visit_mut(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub w: Matrix2D,
    pub b: Vec<f64>,
}

/// Three dense layers mapping each `2h` decoder output to a scalar;
/// tanh on the hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Head {
    pub layers: Vec<Dense>,
}

#[derive(Debug)]
pub struct HeadCache {
    /// Per timestep, the input to each layer plus the final output.
    acts: Vec<Vec<Vec<f64>>>,
}

impl Head {
    pub fn init(sizes: [usize; 4], output_bias: f64, rng: &mut SeededRng) -> Self {
        let mut layers: Vec<Dense> = sizes
            .windows(2)
            .map(|w| Dense {
                w: Matrix2D::glorot(w[1], w[0], w[0], w[1], rng),
                b: vec![0.0; w[1]],
            })
            .collect();
        layers.last_mut().expect("three layers").b[0] = output_bias;
        Self { layers }
    }

    pub fn zeros(sizes: [usize; 4]) -> Self {
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                w: Matrix2D::zeros(w[1], w[0]),
                b: vec![0.0; w[1]],
            })
            .collect();
        Self { layers }
    }

    fn forward_row(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.layers.len();
        let mut acts = Vec::with_capacity(n + 1);
        acts.push(x.to_vec());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.b.clone();
            layer.w.matvec_acc(acts.last().expect("non-empty"), &mut z);
            if k + 1 < n {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// One scalar per input row.
    pub fn forward(&self, input: &Matrix2D) -> Vec<f64> {
        (0..input.rows())
            .map(|t| self.forward_row(input.row(t)).pop().expect("output")[0])
            .collect()
    }

    pub fn forward_cached(&self, input: &Matrix2D) -> (Vec<f64>, HeadCache) {
        let acts: Vec<Vec<Vec<f64>>> = (0..input.rows())
            .map(|t| self.forward_row(input.row(t)))
            .collect();
        let out = acts.iter().map(|a| a.last().expect("output")[0]).collect();
        (out, HeadCache { acts })
    }

    pub fn backward(&self, cache: &HeadCache, d_out: &[f64], grads: &mut Head) -> Matrix2D {
        let n = self.layers.len();
        let in_size = self.layers[0].w.cols();
        let mut d_in = Matrix2D::zeros(d_out.len(), in_size);
        for (t, &dy) in d_out.iter().enumerate() {
            if dy == 0.0 {
                continue;
            }
            let acts = &cache.acts[t];
            let mut delta = vec![dy];
            for k in (0..n).rev() {
                let x = &acts[k];
                grads.layers[k].w.add_outer(&delta, x);
                for (b, d) in grads.layers[k].b.iter_mut().zip(&delta) {
                    *b += d;
                }
                let mut dx = vec![0.0; x.len()];
                self.layers[k].w.matvec_t_acc(&delta, &mut dx);
                if k > 0 {
                    // x = tanh(z) of the previous layer
                    for (d, a) in dx.iter_mut().zip(x) {
                        *d *= 1.0 - a * a;
                    }
                }
                delta = dx;
            }
            d_in.row_mut(t).copy_from_slice(&delta);
        }
        d_in
    }
}

impl ParamSet for Head {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        for (k, layer) in self.layers.iter().enumerate() {
            f(
                &join(prefix, &format!("fc{k}.w")),
                layer.w.shape(),
                layer.w.data(),
            );
            f(
                &join(prefix, &format!("fc{k}.b")),
                (1, layer.b.len()),
                &layer.b,
            );
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for layer in &mut self.layers {
            f(layer.w.data_mut());
            f(&mut layer.b);
        }
    }
}
