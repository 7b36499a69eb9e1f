//! Sequence-to-sequence forecasters: masking front end, shared bidirectional
//! encoder, repeat-vector decoders with dense heads, and checkpoints.

mod checkpoint;
mod config;
mod input;
mod layers;
mod model;
mod network;

pub use checkpoint::{deserialize, serialize, Checkpoint, CHECKPOINT_VERSION};
pub use config::{Channel, ModelConfig, MIN_HISTORY_CYCLES};
pub use input::{
    check_history, history_window, input_steps, mask_and_concat, mask_channels, MaskedSequence,
    PaddedInput,
};
pub use layers::{BiLstmLayer, BiLstmStack, Dense, Head};
pub use model::{
    stl_predict, Forecaster, ForwardTrace, MtlModel, MtlParams, SingleTrajectory, StlModel,
    StlPair, StlParams, TrajectoryPrediction, SOH_C_FLOOR, SOH_R_CEIL,
};
pub use network::{
    encode, encode_backward, encode_cached, Decoder, DecoderCache, EncoderCache, HEAD_OUTPUT_BIAS,
};
