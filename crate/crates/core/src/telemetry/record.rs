use serde::{Deserialize, Serialize};

use super::model::{mean, Direction, MetricSeries};
use crate::config::{Protocol, TestType};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub samples: usize,
    pub mean_mbps: f64,
    pub min_mbps: f64,
    pub max_mbps: f64,
    pub mean_rtt_ms: f64,
}

impl SeriesSummary {
    pub fn of(series: &MetricSeries) -> Self {
        let thr = || series.throughput_mbps.iter().map(|s| s.value);
        Self {
            samples: series.throughput_mbps.len(),
            mean_mbps: series.mean_throughput(),
            min_mbps: thr().reduce(f64::min).unwrap_or(0.0),
            max_mbps: thr().fold(0.0, f64::max),
            mean_rtt_ms: series.mean_rtt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeResult {
    pub serial: String,
    pub ue_class: String,
    pub direction: Direction,
    pub test_type: TestType,
    pub protocol: Protocol,
    pub offered_mbps: f64,
    pub series: MetricSeries,
    pub summary: SeriesSummary,
}

/// One persisted test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    /// Assigned by the store; 0 until recorded.
    pub id: u64,
    pub scenario_id: u32,
    pub stack: String,
    pub node: String,
    pub node_family: String,
    pub started_at: SimTime,
    pub ended_at: SimTime,
    pub ues: Vec<UeResult>,
    /// Sum of per-UE mean throughput.
    pub mean_throughput_mbps: f64,
    pub mean_rtt_ms: f64,
}

impl TestRecord {
    /// Builds a record and computes its summaries from the raw series.
    pub fn new(scenario_id: u32, stack: &str, node: &str, node_family: &str, started_at: SimTime, ended_at: SimTime, ues: Vec<UeResult>) -> Self {
        let mut r = Self {
            id: 0,
            scenario_id,
            stack: stack.into(),
            node: node.into(),
            node_family: node_family.into(),
            started_at,
            ended_at,
            ues,
            mean_throughput_mbps: 0.0,
            mean_rtt_ms: 0.0,
        };
        r.recompute();
        r
    }

    /// Recomputes every summary from the raw series.
    pub fn recompute(&mut self) {
        for ue in &mut self.ues {
            ue.summary = SeriesSummary::of(&ue.series);
        }
        self.mean_throughput_mbps = self.ues.iter().map(|u| u.summary.mean_mbps).sum();
        self.mean_rtt_ms = mean(self.ues.iter().map(|u| u.summary.mean_rtt_ms));
    }

    /// True when the stored summaries match the raw series exactly.
    pub fn summaries_consistent(&self) -> bool {
        let mut copy = self.clone();
        copy.recompute();
        copy == *self
    }
}

/// Query filter; `None` fields match everything. Time bounds apply to
/// `started_at` and are inclusive.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordFilter {
    pub scenario_id: Option<u32>,
    pub stack: Option<String>,
    pub ue_serial: Option<String>,
    pub node_family: Option<String>,
    pub from: Option<SimTime>,
    pub to: Option<SimTime>,
}

impl RecordFilter {
    pub fn scenario(id: u32) -> Self {
        Self { scenario_id: Some(id), ..Self::default() }
    }

    pub fn matches(&self, r: &TestRecord) -> bool {
        self.scenario_id.is_none_or(|s| s == r.scenario_id)
            && self.stack.as_ref().is_none_or(|s| *s == r.stack)
            && self.node_family.as_ref().is_none_or(|f| *f == r.node_family)
            && self.ue_serial.as_ref().is_none_or(|u| r.ues.iter().any(|x| x.serial == *u))
            && self.from.is_none_or(|t| r.started_at >= t)
            && self.to.is_none_or(|t| r.started_at <= t)
    }
}
