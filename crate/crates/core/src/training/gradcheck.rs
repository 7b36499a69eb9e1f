//! Finite-difference audit of the stage-3 training gradient on a miniature
//! multi-task model.

use serde::{Deserialize, Serialize};

use super::objective::{objective, objective_grad, ParamSubset, TrainModel};
use super::samples::{sample_at, TrainingSample};
use crate::dataprep::Normalizer;
use crate::error::Result;
use crate::numeric::{
    finite_difference_coords, relative_error, ParamSet, RegularizationSpec, SeededRng,
};
use crate::seqmodel::{ModelConfig, MtlModel};

pub const GRADCHECK_STEP: f64 = 1e-6;
pub const GRADCHECK_FLOOR: f64 = 1e-6;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// 2 layers, hidden 4, 12 input steps, 6 output steps.
pub fn mini_config() -> ModelConfig {
    ModelConfig {
        num_layers: 2,
        hidden_size: 4,
        input_len: 12,
        output_len: 6,
        input_channels: 2,
        in_step_cycles: 20,
        out_step_cycles: 40,
    }
}

/// Noisy linear histories cut short enough that some target masks are
/// partial.
pub fn mini_samples(config: &ModelConfig, seed: u64) -> Result<Vec<TrainingSample>> {
    let mut rng = SeededRng::new(seed).split("gradcheck-series");
    let last = 260;
    let soh_c: Vec<f64> = (0..=last)
        .map(|c| 1.0 - 2e-4 * c as f64 + 0.002 * rng.normal())
        .collect();
    let soh_r: Vec<f64> = (0..=last)
        .map(|c| 1.0 + 3e-4 * c as f64 + 0.002 * rng.normal())
        .collect();
    let mut out = Vec::new();
    for p in [100, 140, 180, 220] {
        out.extend(sample_at(&soh_c, &soh_r, "gradcheck", p, config)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Flat index and tensor name of the worst coordinate.
    pub worst_index: usize,
    pub worst_tensor: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

fn tensor_name(model: &MtlModel, index: usize) -> String {
    let mut pos = 0;
    let mut name = String::new();
    model.params.visit("", &mut |n, _, v| {
        if name.is_empty() && index < pos + v.len() {
            name = format!("{n}[{}]", index - pos);
        }
        pos += v.len();
    });
    name
}

/// Compares the analytic stage-3 gradient (both masked MAEs plus the
/// penalties) with central differences on `coords` random coordinates.
/// `flip_sign` negates the analytic gradient as a negative control.
pub fn gradient_check(
    model: &MtlModel,
    samples: &[TrainingSample],
    coords: usize,
    seed: u64,
    flip_sign: bool,
) -> Result<GradCheckReport> {
    let weights = [1.0, 1.0];
    let (_, mut analytic) = objective_grad(model, samples, weights, ParamSubset::All)?;
    if flip_sign {
        analytic.iter_mut().for_each(|g| *g = -*g);
    }
    let flat = model.params_flat();
    let mut idx: Vec<usize> = (0..flat.len()).collect();
    SeededRng::new(seed)
        .split("gradcheck-coords")
        .shuffle(&mut idx);
    idx.truncate(coords);

    let mut probe = model.clone();
    let mut loss = |p: &[f64]| {
        probe.set_params_flat(p);
        objective(&probe, samples, weights, ParamSubset::All)
    };
    let numeric = finite_difference_coords(&mut loss, &flat, GRADCHECK_STEP, idx.iter().copied())?;
    let (mut worst, mut worst_err) = (0, -1.0);
    for (k, (&i, &n)) in idx.iter().zip(&numeric).enumerate() {
        let e = relative_error(analytic[i], n, GRADCHECK_FLOOR);
        if e > worst_err {
            worst_err = e;
            worst = k;
        }
    }
    let wi = idx[worst];
    Ok(GradCheckReport {
        coords_checked: idx.len(),
        max_relative_error: worst_err,
        tolerance: GRADCHECK_TOLERANCE,
        passed: worst_err < GRADCHECK_TOLERANCE,
        worst_index: wi,
        worst_tensor: tensor_name(model, wi),
        worst_analytic: analytic[wi],
        worst_numeric: numeric[worst],
    })
}

/// The default audit: miniature config, 600 coordinates.
pub fn gradient_check_mini(seed: u64, flip_sign: bool) -> Result<GradCheckReport> {
    let config = mini_config();
    let norm = Normalizer::new(1.85, 50.0)?;
    let model = MtlModel::new(config, norm, RegularizationSpec::default(), seed)?;
    let samples = mini_samples(&config, seed)?;
    gradient_check(&model, &samples, 600, seed, flip_sign)
}
