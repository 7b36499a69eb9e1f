//! Scalar error metrics, threshold crossings and summary statistics.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kneepoint::Curve;

/// Mean absolute percentage error, in percent.
pub fn mape(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("truth", pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = truth.iter().position(|&t| t == 0.0) {
        return Err(Error::ZeroTruth(i));
    }
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| ((p - t) / t).abs())
        .sum();
    Ok(100.0 * sum / pred.len() as f64)
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len("truth", pred.len(), truth.len())?;
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / pred.len() as f64)
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("pearson y", x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::invalid("pearson needs at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn max(v: &[f64]) -> Option<f64> {
    v.iter().copied().reduce(f64::max)
}

/// Linear-interpolated percentile, `q` in `[0, 100]`.
pub fn percentile(v: &[f64], q: f64) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(s[lo] + (s[hi] - s[lo]) * (pos - lo as f64))
}

pub fn median(v: &[f64]) -> Option<f64> {
    percentile(v, 50.0)
}

/// End-of-life thresholds as fractions of the nominal capacity and the
/// fleet-mean initial resistance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EolThresholds {
    pub cap_first: f64,
    pub cap_second: f64,
    pub res_first: f64,
    pub res_second: f64,
}

impl Default for EolThresholds {
    fn default() -> Self {
        Self {
            cap_first: 0.80,
            cap_second: 0.65,
            res_first: 1.20,
            res_second: 1.30,
        }
    }
}

impl EolThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.cap_second && self.cap_second < self.cap_first && self.cap_first < 1.0) {
            return Err(Error::Config("need 0 < cap_second < cap_first < 1".into()));
        }
        if !(1.0 < self.res_first
            && self.res_first < self.res_second
            && self.res_second.is_finite())
        {
            return Err(Error::Config("need 1 < res_first < res_second".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Falling,
    Rising,
}

/// First cycle at which the curve reaches `threshold_fraction * base` in the
/// given direction, linearly interpolated; `None` when never reached. A curve
/// already past the threshold at its first point crosses there.
pub fn eol_cycle(
    curve: Curve<'_>,
    threshold_fraction: f64,
    base: f64,
    direction: Direction,
) -> Option<f64> {
    let level = threshold_fraction * base;
    let past = |v: f64| match direction {
        Direction::Falling => v <= level,
        Direction::Rising => v >= level,
    };
    let v = curve.values;
    let i = v.iter().position(|&x| past(x))?;
    if i == 0 {
        return Some(curve.cycle_at(0.0));
    }
    let (a, b) = (v[i - 1], v[i]);
    let frac = if b == a { 1.0 } else { (level - a) / (b - a) };
    Some(curve.cycle_at(i as f64 - 1.0 + frac))
}
