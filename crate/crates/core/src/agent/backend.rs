use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::session::AgentReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

impl ToolCall {
    pub fn set(name: &str, value: Value) -> Self {
        Self { name: "set_parameter".into(), arguments: json!({ "name": name, "value": value }) }
    }

    pub fn validate() -> Self {
        Self { name: "validate".into(), arguments: json!({}) }
    }
}

/// A backend answer: tool invocations, or prose that the agent never parses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "snake_case")]
pub enum Reply {
    ToolCalls(Vec<ToolCall>),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Speaker,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
}

impl Message {
    pub fn new(role: Speaker, content: impl Into<String>) -> Self {
        Self { role, content: content.into(), tool_calls: Vec::new() }
    }
}

/// Everything a backend sees for one turn.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest<'a> {
    pub messages: &'a [Message],
    pub tools: &'a Value,
    /// Structured copy of the latest report, when there is one.
    pub last_report: Option<&'a AgentReport>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend reply: {0}")]
    Malformed(String),
}

pub trait BackendAdapter {
    fn name(&self) -> &str;

    /// One model turn, with how long it took.
    fn complete(&mut self, request: &BackendRequest<'_>) -> Result<(Reply, Duration), BackendError>;
}

/// JSON schema of the two agent tools, in function-calling form.
pub fn tool_schema() -> Value {
    json!([
        {
            "type": "function",
            "function": {
                "name": "set_parameter",
                "description": "Set one configuration field. Use null to clear it.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "name": { "type": "string", "description": "Field path, e.g. du_low or bandwidth_mbps" },
                        "value": { "description": "Literal value for the field" }
                    },
                    "required": ["name", "value"]
                }
            }
        },
        {
            "type": "function",
            "function": {
                "name": "validate",
                "description": "Check the configuration against the compatibility graph and parameter rules.",
                "parameters": { "type": "object", "properties": {} }
            }
        }
    ])
}

/// One entry of a scripted replay table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum ScriptStep {
    Reply { reply: Reply },
    /// Fill each open field with its first allowed value from the last
    /// report, then validate. Without a report, just validate.
    CompleteFromFeedback,
}

/// Deterministic backend that replays a table. Once the table runs out it
/// answers with prose.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    steps: VecDeque<ScriptStep>,
    latency: Duration,
}

impl ScriptedBackend {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self { steps: steps.into_iter().collect(), latency: Duration::from_millis(800) }
    }

    /// Simulated time charged per turn.
    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }
}

impl BackendAdapter for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&mut self, request: &BackendRequest<'_>) -> Result<(Reply, Duration), BackendError> {
        let reply = match self.steps.pop_front() {
            Some(ScriptStep::Reply { reply }) => reply,
            Some(ScriptStep::CompleteFromFeedback) => {
                let mut calls = Vec::new();
                if let Some(r) = request.last_report.filter(|r| !r.is_valid()) {
                    for (field, values) in &r.allowed {
                        if let Some(v) = values.first() {
                            calls.push(ToolCall::set(field, literal(v)));
                        }
                    }
                }
                calls.push(ToolCall::validate());
                Reply::ToolCalls(calls)
            }
            None => Reply::Text("I have nothing further to add.".into()),
        };
        Ok((reply, self.latency))
    }
}

/// Allowed values travel as text; numbers and booleans go back as literals.
fn literal(s: &str) -> Value {
    match s {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => s.parse::<i64>().map(Value::from).or_else(|_| s.parse::<f64>().map(Value::from)).unwrap_or_else(|_| Value::String(s.to_owned())),
    }
}
