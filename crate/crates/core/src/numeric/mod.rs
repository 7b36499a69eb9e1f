//! Dense numerical primitives: matrices, LSTM cells, Adam, L1/L2 penalties
//! and a finite-difference oracle. All arithmetic is `f64`.

mod adam;
mod gradcheck;
mod lstm;
mod matrix;
mod params;
mod regularization;
mod rng;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_difference_coords, finite_difference_gradient, relative_error};
pub(crate) use lstm::{
    backward_unchecked as lstm_backward_unchecked, forward_unchecked as lstm_forward_unchecked,
};
pub use lstm::{
    lstm_cell_backward, lstm_cell_backward_acc, lstm_cell_forward, CellInputGrads, LstmCache,
    LstmCellParams,
};
pub use matrix::{dot, sigmoid, Matrix2D};
pub(crate) use params::join;
pub use params::ParamSet;
pub use regularization::{regularization, regularization_acc, RegularizationSpec};
pub use rng::{derive_seed, SeededRng};
