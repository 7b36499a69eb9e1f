//! Conversion between physical units (Ah, mΩ) and state-of-health ratios.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqmodel::Channel;

/// Nominal capacity of the reference cell type, in Ah.
pub const Q_NOMINAL_AH: f64 = 1.85;

/// Reference values dividing capacity and resistance into SOH-C and SOH-R.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    /// Ah.
    pub q_nominal: f64,
    /// Fleet-mean initial resistance in mΩ.
    pub r_base: f64,
}

impl Normalizer {
    pub fn new(q_nominal: f64, r_base: f64) -> Result<Self> {
        if !(q_nominal > 0.0 && q_nominal.is_finite()) {
            return Err(Error::invalid(format!(
                "q_nominal must be > 0, got {q_nominal}"
            )));
        }
        if !(r_base > 0.0 && r_base.is_finite()) {
            return Err(Error::invalid(format!("r_base must be > 0, got {r_base}")));
        }
        Ok(Self { q_nominal, r_base })
    }

    /// Mean cycle-0 resistance over the given (training) cells.
    pub fn from_initial_resistances(initial_mohm: &[f64]) -> Result<Self> {
        if initial_mohm.is_empty() {
            return Err(Error::invalid("no cells to compute r_base from"));
        }
        let mean = initial_mohm.iter().sum::<f64>() / initial_mohm.len() as f64;
        Self::new(Q_NOMINAL_AH, mean)
    }

    pub fn base(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Capacity => self.q_nominal,
            Channel::Resistance => self.r_base,
        }
    }

    pub fn to_soh(&self, channel: Channel, physical: f64) -> f64 {
        physical / self.base(channel)
    }

    pub fn to_physical(&self, channel: Channel, soh: f64) -> f64 {
        soh * self.base(channel)
    }

    pub fn normalize(&self, channel: Channel, physical: &[f64]) -> Vec<f64> {
        physical.iter().map(|&v| self.to_soh(channel, v)).collect()
    }

    pub fn denormalize(&self, channel: Channel, soh: &[f64]) -> Vec<f64> {
        soh.iter().map(|&v| self.to_physical(channel, v)).collect()
    }
}
