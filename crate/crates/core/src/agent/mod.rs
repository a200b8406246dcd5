//! Natural-language intents to validated configurations.
//!
//! A language-model backend fills a working configuration through two
//! tools, `set_parameter` and `validate`. Every value is checked against the
//! catalog as it is set, and nothing leaves the loop unless `validate`
//! accepted it.

mod backend;
mod compiler;
mod corpus;
mod remote;
mod session;

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use backend::{tool_schema, BackendAdapter, BackendError, BackendRequest, Message, Reply, ScriptStep, ScriptedBackend, Speaker, ToolCall};
pub use compiler::{adversarial_script, compile_intent, convergent_script};
pub use corpus::{evaluate_corpus, CorpusEntry, CorpusReport, PromptResult, SEED_CORPUS};
pub use remote::{parse_completion, RemoteBackend, ENV_API_KEY, ENV_MODEL, ENV_URL};
pub use session::{build_feedback, AgentReport, EmittedConfig, Phase, Rejection, Session, ToolResult, TEST_REQUIRED};

use crate::catalog::{Catalog, Role};

const SYSTEM_DEPLOY: &str = include_str!("../../assets/prompts/system_deploy.v1.txt");
const SYSTEM_TEST: &str = include_str!("../../assets/prompts/system_test.v1.txt");
const USER: &str = include_str!("../../assets/prompts/user.v1.txt");
const REPROMPT: &str = include_str!("../../assets/prompts/reprompt.v1.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Deploy,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub max_iterations: u32,
    pub wall: Duration,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { max_iterations: 16, wall: Duration::from_secs(120) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    BudgetExhausted,
    WallTimeout,
    BackendError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    pub success: bool,
    pub iterations: u32,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<FailureReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One backend turn and what the tools made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u32,
    pub prompt: String,
    pub reply: Option<Reply>,
    pub tool_results: Vec<ToolResult>,
    pub report: Option<AgentReport>,
    pub phase: Phase,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutcome {
    pub config: Option<EmittedConfig>,
    pub metrics: AgentMetrics,
    pub trace: Vec<TraceRecord>,
}

impl AgentOutcome {
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|t| serde_json::to_string(t).expect("trace serializes") + "\n").collect()
    }
}

/// System prompt for a mode, filled from the catalog.
pub fn system_prompt(catalog: &Catalog, mode: Mode) -> String {
    match mode {
        Mode::Deploy => {
            let components: String = Role::ALL
                .iter()
                .map(|r| {
                    let names: Vec<String> = catalog.components_of(*r).map(|c| c.name.clone()).collect();
                    format!("  {r}: {}\n", names.join(", "))
                })
                .collect();
            let graph: String = catalog
                .graph()
                .edges()
                .map(|(a, b)| {
                    let n = |id: &str| catalog.get(id).map_or(id.to_owned(), |c| format!("{}={}", c.role, c.name));
                    format!("  {} -- {}\n", n(a), n(b))
                })
                .collect();
            SYSTEM_DEPLOY.replace("{{components}}", components.trim_end()).replace("{{graph}}", graph.trim_end())
        }
        Mode::Test => {
            let g = catalog.test_parameters();
            let params: String = g.parameters.iter().map(|(k, p)| format!("  {k}: {}\n", p.describe())).collect();
            let gens: String = g.generators.iter().map(|(k, ps)| format!("  {k}: {}\n", ps.iter().cloned().collect::<Vec<_>>().join(", "))).collect();
            SYSTEM_TEST.replace("{{parameters}}", params.trim_end()).replace("{{generators}}", gens.trim_end())
        }
    }
}

fn apply_call(session: &mut Session<'_>, call: &ToolCall) -> (ToolResult, Option<AgentReport>) {
    match call.name.as_str() {
        "set_parameter" => {
            let name = call.arguments.get("name").and_then(Value::as_str);
            let value = call.arguments.get("value");
            match (name, value) {
                (Some(n), Some(v)) => (session.set_parameter(n, v), None),
                _ => (
                    ToolResult { tool: call.name.clone(), ok: false, rejection: Some(Rejection::IllegalValue), message: "set_parameter needs `name` and `value`".into() },
                    None,
                ),
            }
        }
        "validate" => {
            let report = session.validate();
            (ToolResult { tool: "validate".into(), ok: report.is_valid(), rejection: None, message: report.message.clone() }, Some(report))
        }
        other => (
            ToolResult { tool: other.into(), ok: false, rejection: Some(Rejection::UnknownPath), message: format!("unknown tool `{other}`; use set_parameter or validate") },
            None,
        ),
    }
}

/// Runs the fill/validate loop until the configuration validates or a
/// budget runs out. Runtime is the sum of backend turn times.
pub fn run_intent(catalog: &Catalog, intent: &str, mode: Mode, backend: &mut dyn BackendAdapter, budgets: Budgets) -> AgentOutcome {
    let mut session = Session::new(catalog, mode);
    let tools = tool_schema();
    let mut messages = vec![Message::new(Speaker::System, system_prompt(catalog, mode)), Message::new(Speaker::User, USER.replace("{{intent}}", intent).trim_end())];
    let mut elapsed = Duration::ZERO;
    let mut last_report: Option<AgentReport> = None;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut failure: Option<(FailureReason, Option<String>)> = None;

    while session.phase != Phase::Done {
        if iterations >= budgets.max_iterations {
            failure = Some((FailureReason::BudgetExhausted, None));
            break;
        }
        if elapsed >= budgets.wall {
            failure = Some((FailureReason::WallTimeout, None));
            break;
        }
        iterations += 1;
        let prompt = messages.last().map(|m| m.content.clone()).unwrap_or_default();
        let request = BackendRequest { messages: &messages, tools: &tools, last_report: last_report.as_ref() };
        let (reply, took) = match backend.complete(&request) {
            Ok(x) => x,
            Err(e) => {
                trace.push(TraceRecord { iteration: iterations, prompt, reply: None, tool_results: Vec::new(), report: None, phase: session.phase, elapsed_s: elapsed.as_secs_f64() });
                failure = Some((FailureReason::BackendError, Some(e.to_string())));
                break;
            }
        };
        elapsed += took;
        if elapsed > budgets.wall {
            trace.push(TraceRecord { iteration: iterations, prompt, reply: Some(reply), tool_results: Vec::new(), report: None, phase: session.phase, elapsed_s: elapsed.as_secs_f64() });
            failure = Some((FailureReason::WallTimeout, None));
            break;
        }

        let mut results = Vec::new();
        let mut report = None;
        match &reply {
            Reply::Text(t) => {
                messages.push(Message::new(Speaker::Assistant, t.clone()));
            }
            Reply::ToolCalls(calls) => {
                let mut m = Message::new(Speaker::Assistant, String::new());
                m.tool_calls = calls.clone();
                messages.push(m);
                for call in calls {
                    let (r, rep) = apply_call(&mut session, call);
                    results.push(r);
                    if rep.is_some() {
                        report = rep;
                    }
                    // calls after a passing validate are ignored
                    if session.phase == Phase::Done {
                        break;
                    }
                }
                let lines: Vec<String> = results.iter().map(|r| serde_json::to_string(r).expect("tool result serializes")).collect();
                messages.push(Message::new(Speaker::Tool, lines.join("\n")));
            }
        }
        if session.phase != Phase::Done {
            let current = report.clone().unwrap_or_else(|| session.check());
            let mut next = String::new();
            if matches!(reply, Reply::Text(_)) {
                next.push_str(REPROMPT);
            }
            if current.is_valid() {
                next.push_str("All fields are set. Call validate.");
            } else {
                next.push_str(&build_feedback(&current, &results));
            }
            last_report = Some(current);
            messages.push(Message::new(Speaker::User, next));
        }
        trace.push(TraceRecord {
            iteration: iterations,
            prompt,
            reply: Some(reply),
            tool_results: results,
            report,
            phase: session.phase,
            elapsed_s: elapsed.as_secs_f64(),
        });
    }

    if failure.is_some() {
        session.phase = Phase::Failed;
    }
    let config = session.emit();
    let (failure_reason, error) = failure.map_or((None, None), |(r, e)| (Some(r), e));
    AgentOutcome {
        metrics: AgentMetrics { success: config.is_some(), iterations, runtime_s: elapsed.as_secs_f64(), failure_reason, error },
        config,
        trace,
    }
}
