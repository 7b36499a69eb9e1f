//! Central finite differences, the verification oracle for every analytic
//! gradient in the crate.

use crate::error::{Error, Result};

/// Central-difference gradient of `loss` at `params`.
pub fn finite_difference_gradient<F>(mut loss: F, params: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    finite_difference_coords(&mut loss, params, step, 0..params.len())
}

/// Central differences restricted to the listed coordinates.
pub fn finite_difference_coords<F, I>(
    loss: &mut F,
    params: &[f64],
    step: f64,
    coords: I,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
    I: IntoIterator<Item = usize>,
{
    if !(step > 0.0) {
        return Err(Error::invalid(format!(
            "finite-difference step must be > 0, got {step}"
        )));
    }
    let mut probe = params.to_vec();
    let mut out = Vec::new();
    for i in coords {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = loss(&probe)?;
        probe[i] = orig - step;
        let down = loss(&probe)?;
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("loss at finite-difference probe"));
        }
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
