mod gradcheck;
mod loss;
mod objective;
mod samples;
mod schedule;
mod split;
mod stage;

pub use gradcheck::{
    gradient_check, gradient_check_mini, mini_config, mini_samples, GradCheckReport,
    GRADCHECK_FLOOR, GRADCHECK_STEP, GRADCHECK_TOLERANCE,
};
pub use loss::{masked_mae, masked_mae_grad};
pub use objective::{objective, objective_grad, LossWeights, ParamSubset, TrainModel};
pub use samples::{
    build_fleet_samples, build_samples, sample_at, sample_positions, target_steps, TrainingSample,
    SAMPLE_STRIDE_CYCLES,
};
pub use schedule::{
    train_multistage, train_stl, Schedule, StageReport, TrainingReport, DESK_BATCH, DESK_LR,
};
pub use split::{split_dataset, split_indices, SplitIndices, SplitSpec, MIN_SPLIT_CELLS};
pub use stage::{
    train_stage, write_history_csv, HistoryRow, StageConfig, StageOutcome, DEFAULT_CLIP_NORM,
    DEFAULT_MIN_DELTA, DEFAULT_PATIENCE,
};

#[cfg(test)]
mod tests;
