//! Multi-task sequence-to-sequence forecasting of lithium-ion cell
//! degradation.
//!
//! A shared bidirectional LSTM encoder reads the early-life capacity and
//! resistance history of a cell; two decoders emit the full future SOH-C and
//! SOH-R trajectories in one pass. Knee points and first/second-life
//! end-of-life cycles are extracted from the predicted curves.
//!
//! Modules, bottom-up:
//!
//! - [`numeric`]: matrices, LSTM cells with exact gradients, Adam, L1/L2
//!   penalties and a finite-difference oracle.
//! - [`seqmodel`]: the multi-task and single-task forecasters and checkpoints.
//! - [`dataprep`]: checkup ingestion, PCHIP interpolation, SOH
//!   normalization, noise injection and synthetic fleets.
//! - [`training`]: dataset splits, sample windows, masked MAE and the staged
//!   training schedules.
//! - [`kneepoint`]: offline and online knee identification.
//! - [`evaluation`]: MAPE/MAE, EOL extraction, lifetime progressions, noise
//!   sweeps, MTL/STL comparisons and correlation analytics.
//! - [`cli`]: reproducible experiment commands behind the `mtlprog` binary.

// `!(x > 0.0)` is used deliberately: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataprep;
pub mod error;
pub mod evaluation;
pub mod kneepoint;
pub mod numeric;
pub mod seqmodel;
pub mod training;

pub use error::{Error, Result};
