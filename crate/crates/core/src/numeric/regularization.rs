//! Combined L1/L2 weight penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSpec {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for RegularizationSpec {
    fn default() -> Self {
        Self {
            lambda1: 1e-5,
            lambda2: 1e-4,
        }
    }
}

impl RegularizationSpec {
    pub const NONE: RegularizationSpec = RegularizationSpec {
        lambda1: 0.0,
        lambda2: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if self.lambda1 >= 0.0 && self.lambda2 >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "regularization weights must be >= 0, got {} / {}",
                self.lambda1, self.lambda2
            )))
        }
    }
}

/// `λ1·Σ|w| + λ2·Σw²` and its gradient `λ1·sign(w) + 2λ2·w` (sign(0) = 0).
pub fn regularization(params: &[f64], spec: &RegularizationSpec) -> Result<(f64, Vec<f64>)> {
    spec.validate()?;
    let mut grad = vec![0.0; params.len()];
    let penalty = regularization_acc(params, spec, &mut grad)?;
    Ok((penalty, grad))
}

/// Like [`regularization`] but adds the gradient into `grad`.
pub fn regularization_acc(
    params: &[f64],
    spec: &RegularizationSpec,
    grad: &mut [f64],
) -> Result<f64> {
    let mut l1 = 0.0;
    let mut l2 = 0.0;
    for (w, g) in params.iter().zip(grad.iter_mut()) {
        if !w.is_finite() {
            return Err(Error::NonFinite("regularized parameter"));
        }
        l1 += w.abs();
        l2 += w * w;
        let sign = if *w > 0.0 {
            1.0
        } else if *w < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g += spec.lambda1 * sign + 2.0 * spec.lambda2 * w;
    }
    Ok(spec.lambda1 * l1 + spec.lambda2 * l2)
}
