//! Evaluation protocol: per-episode metrics (TL, NE, SR, OSR, SPL, nDTW,
//! CR), long-horizon conditional success and report serialization.

mod dtw;
mod metrics;
mod report;

pub use dtw::{downsample, dtw, ndtw, DTW_SPACING};
pub use metrics::{
    geodesic_with_snap, score_episode, score_logged, score_run, EpisodeMetrics, EpisodeResult,
    EvalError, LoggedEvalError, RunSummary,
};
pub use report::{
    aggregate, score_long_horizon, Aggregates, LongHorizonSummary, MetricsReport, ReportConfig,
};
