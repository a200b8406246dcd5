use serde::{Deserialize, Serialize};

use super::record::TestRecord;
use super::TelemetryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    Ok,
    Degraded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionVerdict {
    pub status: VerdictStatus,
    pub latest_mean_mbps: f64,
    pub latest_samples: usize,
    pub history_mean_mbps: f64,
    pub history_records: usize,
    pub threshold: f64,
}

/// Degraded iff the latest mean is strictly below (1 - threshold) times the
/// mean of the historical record means.
pub fn compare_baseline(latest: &TestRecord, history: &[TestRecord], threshold: f64) -> Result<RegressionVerdict, TelemetryError> {
    if history.is_empty() {
        return Err(TelemetryError::NoHistory);
    }
    let history_mean = history.iter().map(|r| r.mean_throughput_mbps).sum::<f64>() / history.len() as f64;
    let status = if latest.mean_throughput_mbps < (1.0 - threshold) * history_mean { VerdictStatus::Degraded } else { VerdictStatus::Ok };
    Ok(RegressionVerdict {
        status,
        latest_mean_mbps: latest.mean_throughput_mbps,
        latest_samples: latest.ues.iter().map(|u| u.summary.samples).sum(),
        history_mean_mbps: history_mean,
        history_records: history.len(),
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::SimTime;

    fn rec(mean: f64) -> TestRecord {
        let mut r = TestRecord::new(1, "arc", "gh200-1", "gh200", SimTime::ZERO, SimTime::ZERO, vec![]);
        r.mean_throughput_mbps = mean;
        r
    }

    #[test]
    fn verdicts() {
        let hist = [rec(275.0)];
        assert_eq!(compare_baseline(&rec(270.0), &hist, 0.1).unwrap().status, VerdictStatus::Ok);
        assert_eq!(compare_baseline(&rec(0.0), &hist, 0.1).unwrap().status, VerdictStatus::Degraded);
        let edge = [rec(100.0)];
        assert_eq!(compare_baseline(&rec(90.0), &edge, 0.1).unwrap().status, VerdictStatus::Ok);
        assert_eq!(compare_baseline(&rec(1.0), &[], 0.1), Err(TelemetryError::NoHistory));
    }
}
