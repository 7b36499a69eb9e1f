//! Supervised samples: growing input windows, shrinking target windows.

use crate::dataprep::{CellSeries, Normalizer};
use crate::error::{Error, Result};
use crate::seqmodel::{history_window, Channel, ModelConfig, PaddedInput, MIN_HISTORY_CYCLES};

/// Cycles between consecutive present-cycle positions.
pub const SAMPLE_STRIDE_CYCLES: usize = 20;

/// One forecasting position of one cell, in SOH units.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSample {
    pub cell_id: String,
    pub present_cycle: usize,
    pub cap_input: PaddedInput,
    pub res_input: PaddedInput,
    /// `output_len` values; zero where `target_mask` is false.
    pub target_cap: Vec<f64>,
    pub target_res: Vec<f64>,
    /// True exactly on the leading real target steps.
    pub target_mask: Vec<bool>,
}

impl TrainingSample {
    pub fn input(&self, channel: Channel) -> &PaddedInput {
        match channel {
            Channel::Capacity => &self.cap_input,
            Channel::Resistance => &self.res_input,
        }
    }

    pub fn target(&self, channel: Channel) -> &[f64] {
        match channel {
            Channel::Capacity => &self.target_cap,
            Channel::Resistance => &self.target_res,
        }
    }

    pub fn valid_targets(&self) -> usize {
        self.target_mask.iter().filter(|&&m| m).count()
    }
}

/// Number of real target steps at cycles `present + k * step`, `k = 1, 2, ...`,
/// up to `last_cycle`, capped at `output_len`.
pub fn target_steps(present: usize, last_cycle: usize, config: &ModelConfig) -> usize {
    (last_cycle.saturating_sub(present) / config.out_step_cycles).min(config.output_len)
}

/// Present-cycle positions used for a series ending at `last_cycle`.
pub fn sample_positions(last_cycle: usize, config: &ModelConfig, stride: usize) -> Vec<usize> {
    (MIN_HISTORY_CYCLES..=config.max_history_cycles())
        .step_by(stride)
        .take_while(|&p| target_steps(p, last_cycle, config) >= 1)
        .collect()
}

fn targets(soh: &[f64], present: usize, n: usize, config: &ModelConfig) -> Vec<f64> {
    let mut t = vec![0.0; config.output_len];
    for (k, slot) in t.iter_mut().take(n).enumerate() {
        *slot = soh[present + (k + 1) * config.out_step_cycles];
    }
    t
}

/// One sample at `present`; `None` when no target step fits.
pub fn sample_at(
    soh_c: &[f64],
    soh_r: &[f64],
    cell_id: &str,
    present: usize,
    config: &ModelConfig,
) -> Result<Option<TrainingSample>> {
    let last = soh_c.len() - 1;
    let n = target_steps(present, last, config);
    if n == 0 {
        return Ok(None);
    }
    let mut target_mask = vec![false; config.output_len];
    target_mask[..n].iter_mut().for_each(|m| *m = true);
    Ok(Some(TrainingSample {
        cell_id: cell_id.to_string(),
        present_cycle: present,
        cap_input: history_window(soh_c, present, config)?,
        res_input: history_window(soh_r, present, config)?,
        target_cap: targets(soh_c, present, n, config),
        target_res: targets(soh_r, present, n, config),
        target_mask,
    }))
}

/// Samples every `stride` cycles from cycle 100 while at least one target step
/// remains and the history fits the input window.
pub fn build_samples(
    cell: &CellSeries,
    normalizer: &Normalizer,
    config: &ModelConfig,
    stride: usize,
) -> Result<Vec<TrainingSample>> {
    if stride == 0 {
        return Err(Error::invalid("sample stride must be >= 1"));
    }
    if cell.last_cycle() < MIN_HISTORY_CYCLES {
        return Err(Error::InsufficientHistory {
            available: cell.last_cycle(),
            required: MIN_HISTORY_CYCLES,
        });
    }
    let soh = cell.normalize(normalizer);
    let mut out = Vec::new();
    for p in sample_positions(cell.last_cycle(), config, stride) {
        if let Some(s) = sample_at(&soh.soh_c, &soh.soh_r, &cell.cell_id, p, config)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Samples of every cell, in cell order.
pub fn build_fleet_samples(
    cells: &[CellSeries],
    normalizer: &Normalizer,
    config: &ModelConfig,
    stride: usize,
) -> Result<Vec<TrainingSample>> {
    let mut out = Vec::new();
    for c in cells {
        out.extend(build_samples(c, normalizer, config, stride)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_cell(last: usize) -> CellSeries {
        let q = (0..=last).map(|c| 1.85 - 1e-4 * c as f64).collect();
        let r = (0..=last).map(|c| 50.0 + 1e-3 * c as f64).collect();
        CellSeries::new("lin", q, r).unwrap()
    }

    fn norm() -> Normalizer {
        Normalizer::new(1.85, 50.0).unwrap()
    }

    #[test]
    fn first_position_window_arithmetic() {
        let config = ModelConfig::default();
        let s = build_samples(&linear_cell(2100), &norm(), &config, SAMPLE_STRIDE_CYCLES).unwrap();
        let first = &s[0];
        assert_eq!(first.present_cycle, 100);
        assert_eq!(first.cap_input.real().len(), 20);
        assert_eq!(first.cap_input.valid_from(), 364);
        assert_eq!(first.valid_targets(), 100);
        assert_eq!(first.target_mask.len() - first.valid_targets(), 28);
        assert!(first.target_cap[100..].iter().all(|&v| v == 0.0));
        assert!((first.target_cap[0] - (1.85 - 1.2e-2) / 1.85).abs() < 1e-15);
        assert!((first.target_cap[99] - (1.85 - 0.21) / 1.85).abs() < 1e-15);
        // The 1920-cycle input window caps positions at 100, 120, ..., 1920.
        assert_eq!(s.len(), 92);
        assert_eq!(s.last().unwrap().present_cycle, 1920);
        // With a longer window: 100, ..., 2080; cycle 2100 leaves no target.
        let wide = ModelConfig {
            input_len: 500,
            ..config
        };
        let s = build_samples(&linear_cell(2100), &norm(), &wide, SAMPLE_STRIDE_CYCLES).unwrap();
        assert_eq!(s.len(), 100);
        assert_eq!(s.last().unwrap().valid_targets(), 1);
    }

    #[test]
    fn history_cap_limits_positions() {
        let config = ModelConfig::default();
        assert_eq!(config.max_history_cycles(), 1920);
        let positions = sample_positions(5000, &config, 20);
        assert_eq!(*positions.last().unwrap(), 1920);
        assert_eq!(
            sample_positions(2100, &ModelConfig::desk(), 20).last(),
            Some(&1920)
        );
    }

    #[test]
    fn mask_matches_targets() {
        let config = ModelConfig::desk();
        for s in build_samples(&linear_cell(900), &norm(), &config, 20).unwrap() {
            let n = s.valid_targets();
            assert!(n >= 1);
            assert!(s.target_mask[..n].iter().all(|&m| m));
            assert!(s.target_mask[n..].iter().all(|&m| !m));
            assert!(s.target_res[n..].iter().all(|&v| v == 0.0));
            assert!(s.target_res[..n].iter().all(|&v| v > 0.0));
            assert!(s.present_cycle + n * 40 <= 900);
            assert!(s.present_cycle + (n + 1) * 40 > 900 || n == config.output_len);
        }
    }

    #[test]
    fn short_series_rejected() {
        assert!(matches!(
            build_samples(&linear_cell(99), &norm(), &ModelConfig::desk(), 20),
            Err(Error::InsufficientHistory { .. })
        ));
    }
}
