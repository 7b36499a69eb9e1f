//! Single LSTM cell with an exact backward pass.
//!
//! Gate rows are stacked as `[input, forget, candidate, output]`, each `h` rows:
//!
//! ```text
//! i = σ(Wx_i x + Wh_i h' + b_i)      c = f ⊙ c' + i ⊙ g
//! f = σ(Wx_f x + Wh_f h' + b_f)      h = o ⊙ tanh(c)
//! g = tanh(Wx_g x + Wh_g h' + b_g)
//! o = σ(Wx_o x + Wh_o h' + b_o)
//! ```

use crate::error::{check_len, Error, Result};
use crate::numeric::matrix::sigmoid;
use crate::numeric::params::{join, ParamSet};
use crate::numeric::{Matrix2D, SeededRng};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    /// `4h x d` input weights.
    pub wx: Matrix2D,
    /// `4h x h` recurrent weights.
    pub wh: Matrix2D,
    /// `4h` biases.
    pub b: Vec<f64>,
}

impl LstmCellParams {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        Self {
            wx: Matrix2D::zeros(4 * hidden_size, input_size),
            wh: Matrix2D::zeros(4 * hidden_size, hidden_size),
            b: vec![0.0; 4 * hidden_size],
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at 1.0.
    pub fn init(input_size: usize, hidden_size: usize, rng: &mut SeededRng) -> Self {
        let h4 = 4 * hidden_size;
        let wx = Matrix2D::glorot(h4, input_size, input_size, h4, rng);
        let wh = Matrix2D::glorot(h4, hidden_size, hidden_size, h4, rng);
        let mut b = vec![0.0; h4];
        b[hidden_size..2 * hidden_size]
            .iter_mut()
            .for_each(|v| *v = 1.0);
        Self { wx, wh, b }
    }

    pub fn hidden_size(&self) -> usize {
        self.wh.cols()
    }

    pub fn input_size(&self) -> usize {
        self.wx.cols()
    }
}

impl ParamSet for LstmCellParams {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, (usize, usize), &[f64])) {
        f(&join(prefix, "wx"), self.wx.shape(), self.wx.data());
        f(&join(prefix, "wh"), self.wh.shape(), self.wh.data());
        f(&join(prefix, "b"), (1, self.b.len()), &self.b);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        f(self.wx.data_mut());
        f(self.wh.data_mut());
        f(&mut self.b);
    }
}

/// Intermediates of one forward step.
#[derive(Clone, Debug)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCache {
    pub fn input_size(&self) -> usize {
        self.x.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.h_prev.len()
    }
}

/// Gradients flowing out of one backward step.
#[derive(Clone, Debug, PartialEq)]
pub struct CellInputGrads {
    pub grad_x: Vec<f64>,
    pub grad_h_prev: Vec<f64>,
    pub grad_c_prev: Vec<f64>,
}

pub fn lstm_cell_forward(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmCellParams,
) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
    let h = params.hidden_size();
    check_len("lstm x", params.input_size(), x.len())?;
    check_len("lstm h_prev", h, h_prev.len())?;
    check_len("lstm c_prev", h, c_prev.len())?;
    check_len("lstm bias", 4 * h, params.b.len())?;
    check_len("lstm wx rows", 4 * h, params.wx.rows())?;
    Ok(forward_unchecked(x, h_prev, c_prev, params))
}

pub(crate) fn forward_unchecked(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    params: &LstmCellParams,
) -> (Vec<f64>, Vec<f64>, LstmCache) {
    let h = params.hidden_size();
    let mut z = params.b.clone();
    params.wx.matvec_acc(x, &mut z);
    params.wh.matvec_acc(h_prev, &mut z);
    for (k, v) in z.iter_mut().enumerate() {
        *v = if (2 * h..3 * h).contains(&k) {
            v.tanh()
        } else {
            sigmoid(*v)
        };
    }
    let mut c = vec![0.0; h];
    let mut tanh_c = vec![0.0; h];
    let mut h_new = vec![0.0; h];
    for j in 0..h {
        c[j] = z[h + j] * c_prev[j] + z[j] * z[2 * h + j];
        tanh_c[j] = c[j].tanh();
        h_new[j] = z[3 * h + j] * tanh_c[j];
    }
    let cache = LstmCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        c_prev: c_prev.to_vec(),
        gates: z,
        tanh_c,
    };
    (h_new, c.clone(), cache)
}

/// Backward step that adds parameter gradients into `grads`.
pub fn lstm_cell_backward_acc(
    params: &LstmCellParams,
    cache: &LstmCache,
    grad_h: &[f64],
    grad_c: &[f64],
    grads: &mut LstmCellParams,
) -> Result<CellInputGrads> {
    let h = params.hidden_size();
    if cache.hidden_size() != h || cache.input_size() != params.input_size() {
        return Err(Error::ForeignCache(format!(
            "cache is {}x{} (input x hidden), params are {}x{}",
            cache.input_size(),
            cache.hidden_size(),
            params.input_size(),
            h
        )));
    }
    check_len("lstm grad_h", h, grad_h.len())?;
    check_len("lstm grad_c", h, grad_c.len())?;
    if grads.wx.shape() != params.wx.shape() || grads.wh.shape() != params.wh.shape() {
        return Err(Error::DimensionMismatch {
            operand: "lstm grad params",
            expected: params.wx.rows() * params.wx.cols(),
            actual: grads.wx.rows() * grads.wx.cols(),
        });
    }
    Ok(backward_unchecked(params, cache, grad_h, grad_c, grads))
}

pub(crate) fn backward_unchecked(
    params: &LstmCellParams,
    cache: &LstmCache,
    grad_h: &[f64],
    grad_c: &[f64],
    grads: &mut LstmCellParams,
) -> CellInputGrads {
    let h = params.hidden_size();
    let g = &cache.gates;
    let mut dz = vec![0.0; 4 * h];
    let mut grad_c_prev = vec![0.0; h];
    for j in 0..h {
        let (gi, gf, gg, go) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
        let tc = cache.tanh_c[j];
        let dc = grad_c[j] + grad_h[j] * go * (1.0 - tc * tc);
        dz[j] = dc * gg * gi * (1.0 - gi);
        dz[h + j] = dc * cache.c_prev[j] * gf * (1.0 - gf);
        dz[2 * h + j] = dc * gi * (1.0 - gg * gg);
        dz[3 * h + j] = grad_h[j] * tc * go * (1.0 - go);
        grad_c_prev[j] = dc * gf;
    }
    grads.wx.add_outer(&dz, &cache.x);
    grads.wh.add_outer(&dz, &cache.h_prev);
    for (b, d) in grads.b.iter_mut().zip(&dz) {
        *b += d;
    }
    let mut grad_x = vec![0.0; cache.x.len()];
    params.wx.matvec_t_acc(&dz, &mut grad_x);
    let mut grad_h_prev = vec![0.0; h];
    params.wh.matvec_t_acc(&dz, &mut grad_h_prev);
    CellInputGrads {
        grad_x,
        grad_h_prev,
        grad_c_prev,
    }
}

/// Backward step returning fresh parameter gradients.
pub fn lstm_cell_backward(
    params: &LstmCellParams,
    cache: &LstmCache,
    grad_h: &[f64],
    grad_c: &[f64],
) -> Result<(CellInputGrads, LstmCellParams)> {
    let mut grads = LstmCellParams::zeros(params.input_size(), params.hidden_size());
    let inputs = lstm_cell_backward_acc(params, cache, grad_h, grad_c, &mut grads)?;
    Ok((inputs, grads))
}
