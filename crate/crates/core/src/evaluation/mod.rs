mod compare;
mod degradation;
mod metrics;
mod progression;
mod sweep;

pub use compare::{
    compare_mtl_stl, time_calls, ComparisonRow, ComparisonTable, ComparisonTiming, TimingStats,
};
pub use degradation::{
    cell_metrics, degradation_metrics, CellMetrics, DegradationTable, METRIC_NAMES,
};
pub use metrics::{
    eol_cycle, mae, mape, max, mean, median, pearson, percentile, Direction, EolThresholds,
};
pub use progression::{
    knee_references, progression_eval, ChannelSummary, EvalContext, KneeReferences, MetricsReport,
    PositionRecord, TableRow,
};
pub use sweep::{noise_sweep, NoiseColumn, NOISE_GRID};

#[cfg(test)]
mod tests;
