use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ResolvedDeployment, StackKind};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunKind {
    Deploy,
    Redeploy,
    Test,
    Teardown,
}

impl fmt::Display for RunKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunKind::Deploy => "deploy",
            RunKind::Redeploy => "redeploy",
            RunKind::Test => "test",
            RunKind::Teardown => "teardown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskOutcome {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub run: u64,
    pub pipeline: RunKind,
    pub scenario_id: u32,
    pub task: String,
    pub start: SimTime,
    pub end: SimTime,
    pub outcome: TaskOutcome,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl TaskRecord {
    pub fn duration(&self) -> SimTime {
        self.end.saturating_sub(self.start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Running,
    Succeeded,
    Failed,
}

/// One executed pipeline: tasks run one after another in declared order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineRun {
    pub id: u64,
    pub kind: RunKind,
    pub scenario_id: u32,
    pub planned: Vec<String>,
    pub tasks: Vec<TaskRecord>,
    pub state: RunState,
    pub started_at: SimTime,
    pub ended_at: Option<SimTime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PipelineRun {
    pub fn total(&self) -> SimTime {
        self.tasks.iter().map(TaskRecord::duration).fold(SimTime::ZERO, |a, b| a + b)
    }

    /// Task name → seconds.
    pub fn breakdown(&self) -> BTreeMap<String, f64> {
        self.tasks.iter().map(|t| (t.task.clone(), t.duration().as_secs_f64())).collect()
    }

    pub fn task(&self, name: &str) -> Option<&TaskRecord> {
        self.tasks.iter().find(|t| t.task == name)
    }
}

/// Result of a completed deployment pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeploymentRecord {
    pub scenario_id: u32,
    pub stack: StackKind,
    pub node: String,
    pub pool: String,
    pub run: u64,
    pub resolved: ResolvedDeployment,
    /// Seconds; equals the sum of the breakdown.
    pub total_s: f64,
    pub breakdown: BTreeMap<String, f64>,
    pub tasks: Vec<TaskRecord>,
}

impl DeploymentRecord {
    pub fn gnb_setup_s(&self) -> f64 {
        self.breakdown.get("gnb_setup").copied().unwrap_or(0.0)
    }
}
