//! Seeded synthetic fleets with an exponential knee on top of linear fade.
//!
//! Capacity: `q(n) = Q0 (1 - a n - b (exp(n / tau) - 1))`.
//! Resistance: `r(n) = R0 (1 + c n + d (exp(n / tau_r) - 1))`.
//! A per-cell latent `z` couples faster linear fade to an earlier knee onset,
//! which spreads lifetimes across the fleet. The resistance amplitude `d` is
//! solved per cell so that SOH-R reaches `sync_soh_r` where SOH-C reaches
//! `sync_soh_c`; both channels then run past their second-life thresholds
//! before either end-of-test rule truncates the series. Ground-truth knees come from a
//! dense maximum-curvature search on the closed form; EOL crossings from
//! bisection.

use serde::{Deserialize, Serialize};

use super::normalize::{Normalizer, Q_NOMINAL_AH};
use super::series::CellSeries;
use crate::error::{Error, Result};
use crate::numeric::SeededRng;
use crate::seqmodel::Channel;

/// Fleet-level distribution of per-cell parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    /// Ah.
    pub q0_mean: f64,
    pub q0_rel_sd: f64,
    /// mΩ.
    pub r0_mean: f64,
    pub r0_rel_sd: f64,
    /// Linear capacity fade per cycle.
    pub cap_linear: f64,
    /// Linear resistance growth per cycle.
    pub res_linear: f64,
    /// Cycle at which the exponential term reaches `knee_level`.
    pub onset_mean: f64,
    /// Relative onset shift per unit latent; positive latent means earlier onset.
    pub onset_latent: f64,
    /// Relative linear-rate shift per unit latent.
    pub linear_latent: f64,
    /// Idiosyncratic relative noise on onsets and linear rates.
    pub idio_rel_sd: f64,
    /// Exponential time constant in cycles.
    pub tau: f64,
    pub tau_rel_sd: f64,
    /// Relative spread of the resistance time constant around the capacity one.
    pub res_rel_sd: f64,
    /// Size of the capacity exponential term at onset; zero removes both knees.
    pub knee_level: f64,
    /// Paired SOH levels reached at the same cycle.
    pub sync_soh_c: f64,
    pub sync_soh_r: f64,
    pub latent_clip: f64,
    pub soh_c_end: f64,
    pub soh_r_end: f64,
    pub max_cycles: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            q0_mean: Q_NOMINAL_AH,
            q0_rel_sd: 0.01,
            r0_mean: 50.0,
            r0_rel_sd: 0.03,
            cap_linear: 1.0e-4,
            res_linear: 1.0e-4,
            onset_mean: 1000.0,
            onset_latent: 0.2,
            linear_latent: 0.25,
            idio_rel_sd: 0.03,
            tau: 60.0,
            tau_rel_sd: 0.1,
            res_rel_sd: 0.02,
            knee_level: 0.02,
            sync_soh_c: 0.625,
            sync_soh_r: 1.325,
            latent_clip: 2.5,
            soh_c_end: 0.6,
            soh_r_end: 1.35,
            max_cycles: 6000,
        }
    }
}

impl SynthParams {
    /// The fleet's reference normalizer: nominal capacity and mean initial resistance.
    pub fn normalizer(&self) -> Normalizer {
        Normalizer {
            q_nominal: Q_NOMINAL_AH,
            r_base: self.r0_mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("q0_rel_sd", self.q0_rel_sd),
            ("r0_rel_sd", self.r0_rel_sd),
            ("cap_linear", self.cap_linear),
            ("res_linear", self.res_linear),
            ("onset_latent", self.onset_latent),
            ("linear_latent", self.linear_latent),
            ("idio_rel_sd", self.idio_rel_sd),
            ("tau_rel_sd", self.tau_rel_sd),
            ("res_rel_sd", self.res_rel_sd),
            ("knee_level", self.knee_level),
            ("latent_clip", self.latent_clip),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("synth.{name} must be >= 0, got {v}")));
            }
        }
        let positive = [
            ("q0_mean", self.q0_mean),
            ("r0_mean", self.r0_mean),
            ("onset_mean", self.onset_mean),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("synth.{name} must be > 0, got {v}")));
            }
        }
        if !(self.soh_c_end > 0.0 && self.soh_c_end < 1.0) {
            return Err(Error::Config("synth.soh_c_end must lie in (0, 1)".into()));
        }
        if !(self.soh_r_end > 1.0 && self.soh_r_end.is_finite()) {
            return Err(Error::Config("synth.soh_r_end must be > 1".into()));
        }
        if !(self.sync_soh_c >= self.soh_c_end && self.sync_soh_c < 1.0) {
            return Err(Error::Config(
                "synth.sync_soh_c must lie in [soh_c_end, 1)".into(),
            ));
        }
        if !(self.sync_soh_r > 1.0 && self.sync_soh_r <= self.soh_r_end) {
            return Err(Error::Config(
                "synth.sync_soh_r must lie in (1, soh_r_end]".into(),
            ));
        }
        Ok(())
    }
}

/// Closed-form parameters of one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub q0: f64,
    pub a: f64,
    pub b: f64,
    pub tau: f64,
    pub r0: f64,
    pub c: f64,
    pub d: f64,
    pub tau_r: f64,
}

impl CellParams {
    pub fn capacity(&self, n: f64) -> f64 {
        self.q0 * (1.0 - self.a * n - self.b * ((n / self.tau).exp() - 1.0))
    }

    pub fn resistance(&self, n: f64) -> f64 {
        self.r0 * (1.0 + self.c * n + self.d * ((n / self.tau_r).exp() - 1.0))
    }

    /// Value, first and second derivative of a channel at cycle `n`.
    fn jet(&self, channel: Channel, n: f64) -> (f64, f64, f64) {
        match channel {
            Channel::Capacity => {
                let e = (n / self.tau).exp();
                (
                    self.capacity(n),
                    -self.q0 * (self.a + self.b / self.tau * e),
                    -self.q0 * self.b / (self.tau * self.tau) * e,
                )
            }
            Channel::Resistance => {
                let e = (n / self.tau_r).exp();
                (
                    self.resistance(n),
                    self.r0 * (self.c + self.d / self.tau_r * e),
                    self.r0 * self.d / (self.tau_r * self.tau_r) * e,
                )
            }
        }
    }

    pub fn value(&self, channel: Channel, n: f64) -> f64 {
        match channel {
            Channel::Capacity => self.capacity(n),
            Channel::Resistance => self.resistance(n),
        }
    }
}

/// Known events of one synthetic cell, in fractional cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub cell_id: String,
    pub params: CellParams,
    pub last_cycle: usize,
    pub cap_knee: Option<f64>,
    pub res_knee: Option<f64>,
    pub eol80: Option<f64>,
    pub eol65: Option<f64>,
    pub eol120: Option<f64>,
    pub eol130: Option<f64>,
}

impl GroundTruth {
    pub fn knee(&self, channel: Channel) -> Option<f64> {
        match channel {
            Channel::Capacity => self.cap_knee,
            Channel::Resistance => self.res_knee,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCell {
    pub series: CellSeries,
    pub truth: GroundTruth,
}

const CURVATURE_SAMPLES_PER_CYCLE: usize = 20;
/// Below this peak curvature (normalized axes) a curve is treated as straight.
const MIN_KNEE_CURVATURE: f64 = 1e-6;

/// Cycle of maximum curvature of `f` over `[0, last]` with both axes scaled
/// to unit range. `None` for a straight line.
fn curvature_knee(jet: impl Fn(f64) -> (f64, f64, f64), last: f64) -> Option<f64> {
    let steps = (last * CURVATURE_SAMPLES_PER_CYCLE as f64).ceil() as usize;
    let (y0, _, _) = jet(0.0);
    let (y1, _, _) = jet(last);
    let range = (y1 - y0).abs();
    if range == 0.0 {
        return None;
    }
    let (sx, sy) = (1.0 / last, 1.0 / range);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=steps {
        let n = last * i as f64 / steps as f64;
        let (_, d1, d2) = jet(n);
        let yp = d1 * sy / sx;
        let ypp = d2 * sy / (sx * sx);
        let k = ypp.abs() / (1.0 + yp * yp).powf(1.5);
        if k > best.1 {
            best = (n, k);
        }
    }
    (best.1 > MIN_KNEE_CURVATURE).then_some(best.0)
}

/// First `n` in `[0, last]` where the monotone `g` reaches zero.
fn crossing(g: impl Fn(f64) -> f64, last: f64) -> Option<f64> {
    if g(0.0) >= 0.0 {
        return Some(0.0);
    }
    if g(last) < 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0, last);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-9 {
            break;
        }
    }
    Some(hi)
}

fn draw_cell(p: &SynthParams, rng: &mut SeededRng) -> CellParams {
    let z = rng.normal().clamp(-p.latent_clip, p.latent_clip);
    let mut idio = |sd: f64| sd * rng.normal();
    let q0 = p.q0_mean * (1.0 + idio(p.q0_rel_sd));
    let r0 = p.r0_mean * (1.0 + idio(p.r0_rel_sd));
    let a = p.cap_linear * (1.0 + p.linear_latent * z + idio(p.idio_rel_sd));
    let c = p.res_linear * (1.0 + p.linear_latent * z + idio(p.idio_rel_sd));
    let onset = p.onset_mean * (1.0 - p.onset_latent * z + idio(p.idio_rel_sd));
    let tau = p.tau * (1.0 + idio(p.tau_rel_sd));
    let tau_r = tau * (1.0 + idio(p.res_rel_sd));
    let mut cp = CellParams {
        q0,
        a,
        b: p.knee_level * (-onset / tau).exp(),
        tau,
        r0,
        c,
        d: 0.0,
        tau_r,
    };
    let norm = p.normalizer();
    let target_q = p.sync_soh_c * norm.q_nominal;
    let sync = crossing(|n| target_q - cp.capacity(n), p.max_cycles as f64);
    if let Some(n) = sync.filter(|&n| n > 0.0) {
        let gap = p.sync_soh_r * norm.r_base / r0 - 1.0 - c * n;
        cp.d = gap.max(0.0) / ((n / tau_r).exp() - 1.0);
    }
    cp
}

/// Builds one cell from explicit parameters, truncating at the end-of-test
/// thresholds.
pub fn synth_cell(cell_id: &str, cp: CellParams, p: &SynthParams) -> Result<SynthCell> {
    let cell_err = |message: String| Error::Cell {
        cell_id: cell_id.to_string(),
        message,
    };
    let finite = [cp.q0, cp.a, cp.b, cp.tau, cp.r0, cp.c, cp.d, cp.tau_r]
        .iter()
        .all(|v| v.is_finite());
    if !finite || cp.q0 <= 0.0 || cp.r0 <= 0.0 || cp.tau <= 0.0 || cp.tau_r <= 0.0 {
        return Err(cell_err(format!("non-physical parameters {cp:?}")));
    }
    if cp.a < 0.0 || cp.b < 0.0 || cp.c < 0.0 || cp.d < 0.0 {
        return Err(cell_err(format!(
            "degradation rates must be non-negative, got {cp:?}"
        )));
    }
    let norm = p.normalizer();
    let mut capacity = Vec::new();
    let mut resistance = Vec::new();
    for n in 0..=p.max_cycles {
        let q = cp.capacity(n as f64);
        let r = cp.resistance(n as f64);
        if norm.to_soh(Channel::Capacity, q) < p.soh_c_end
            || norm.to_soh(Channel::Resistance, r) > p.soh_r_end
        {
            break;
        }
        capacity.push(q);
        resistance.push(r);
    }
    if capacity.len() < 2 {
        return Err(cell_err(
            "curve starts beyond the end-of-test thresholds".into(),
        ));
    }
    if capacity.len() > p.max_cycles {
        return Err(cell_err(format!(
            "curve does not reach its end-of-test thresholds within {} cycles",
            p.max_cycles
        )));
    }
    let last = (capacity.len() - 1) as f64;
    let truth = GroundTruth {
        cell_id: cell_id.to_string(),
        params: cp,
        last_cycle: capacity.len() - 1,
        cap_knee: curvature_knee(|n| cp.jet(Channel::Capacity, n), last),
        res_knee: curvature_knee(|n| cp.jet(Channel::Resistance, n), last),
        eol80: crossing(
            |n| 0.80 - norm.to_soh(Channel::Capacity, cp.capacity(n)),
            last,
        ),
        eol65: crossing(
            |n| 0.65 - norm.to_soh(Channel::Capacity, cp.capacity(n)),
            last,
        ),
        eol120: crossing(
            |n| norm.to_soh(Channel::Resistance, cp.resistance(n)) - 1.20,
            last,
        ),
        eol130: crossing(
            |n| norm.to_soh(Channel::Resistance, cp.resistance(n)) - 1.30,
            last,
        ),
    };
    let series = CellSeries::new(cell_id, capacity, resistance)?;
    Ok(SynthCell { series, truth })
}

/// `n_cells` seeded cells named `synth-000`, `synth-001`, ...
pub fn synth_fleet(n_cells: usize, seed: u64, params: &SynthParams) -> Result<Vec<SynthCell>> {
    if n_cells == 0 {
        return Err(Error::invalid("n_cells must be >= 1"));
    }
    params.validate()?;
    let root = SeededRng::new(seed).split("synth-fleet");
    (0..n_cells)
        .map(|i| {
            let mut rng = root.split_index("cell", i as u64);
            let cp = draw_cell(params, &mut rng);
            synth_cell(&format!("synth-{i:03}"), cp, params)
        })
        .collect()
}
