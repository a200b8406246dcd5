//! Synthetic performance samples, the test-result store and baseline
//! comparison.

mod baseline;
mod model;
mod record;
mod store;

pub use baseline::{compare_baseline, RegressionVerdict, VerdictStatus};
pub use model::{
    mean, synthesize_performance, Direction, LatencyProfile, MetricSeries, PerformanceModel, ProfileKey, Resolved, Sample, Shaping,
    ThroughputProfile, SEED_PERFORMANCE,
};
pub use record::{RecordFilter, SeriesSummary, TestRecord, UeResult};
pub use store::Store;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TelemetryError {
    #[error("no performance profile matches `{0}`")]
    UnknownProfile(String),
    #[error("performance model: {0}")]
    Model(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("no history matches the filter")]
    NoHistory,
}
