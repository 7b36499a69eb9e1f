mod checkup;
mod noise;
mod normalize;
mod pchip;
mod series;
mod synth;

pub use checkup::{
    group_by_cell, load_checkups, parse_checkups, write_checkups, CheckupRecord, CHECKUP_HEADER,
};
pub use noise::{add_noise, perturb, NoiseSpec};
pub use normalize::{Normalizer, Q_NOMINAL_AH};
pub use pchip::Pchip;
pub use series::{interpolate_pchip, CellSeries, SohSeries, SERIES_HEADER};
pub use synth::{synth_cell, synth_fleet, CellParams, GroundTruth, SynthCell, SynthParams};
