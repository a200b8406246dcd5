//! Randomized scripted-backend tables: junk paths and values, text
//! replies and feedback-driven turns.
#![allow(dead_code)]

use proptest::prelude::*;
use ranorch_core::agent::{run_intent, Budgets, EmittedConfig, Mode, Reply, ScriptStep, ScriptedBackend, ToolCall};
use ranorch_core::config::TestSpec;
use ranorch_core::{Catalog, Role};
use serde_json::{json, Value};

pub const DEPLOY_PATHS: [&str; 10] = ["core", "cu", "du_high", "du_low", "ru", "id", "ru.location", "du_hihg", "radio", "du-low"];
pub const TEST_PATHS: [&str; 12] = [
    "test_type",
    "bandwidth_mbps",
    "ue_count",
    "duration",
    "protocol",
    "reverse",
    "distribution",
    "json_output",
    "server_port",
    "scenario_id",
    "bandwidt_mbps",
    "rate",
];

pub fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        prop::sample::select(vec![
            "open5gs", "oai", "srsran", "cubb", "none", "foxconn", "rusim", "usrp_x310", "usrp_x410", "OAI", "bogus", "iperf", "mgen", "udp",
            "tcp", "poisson", "burst", "",
        ])
        .prop_map(|s| json!(s)),
        (-5i64..70_000).prop_map(|n| json!(n)),
        (-10.0f64..2000.0).prop_map(|n| json!(n)),
        any::<bool>().prop_map(|b| json!(b)),
        Just(Value::Null),
        Just(json!([1, 2])),
    ]
}

pub fn call(mode: Mode) -> impl Strategy<Value = ToolCall> {
    let paths: Vec<&'static str> = match mode {
        Mode::Deploy => DEPLOY_PATHS.to_vec(),
        Mode::Test => TEST_PATHS.to_vec(),
    };
    prop_oneof![
        6 => (prop::sample::select(paths), value()).prop_map(|(p, v)| ToolCall::set(p, v)),
        2 => Just(ToolCall::validate()),
        1 => Just(ToolCall { name: "launch".into(), arguments: json!({}) }),
        1 => Just(ToolCall { name: "set_parameter".into(), arguments: json!({"value": 3}) }),
    ]
}

pub fn step(mode: Mode) -> impl Strategy<Value = ScriptStep> {
    prop_oneof![
        6 => prop::collection::vec(call(mode), 0..8).prop_map(|calls| ScriptStep::Reply { reply: Reply::ToolCalls(calls) }),
        1 => "[a-z ]{0,30}".prop_map(|t| ScriptStep::Reply { reply: Reply::Text(t) }),
        2 => Just(ScriptStep::CompleteFromFeedback),
    ]
}

pub fn mode() -> impl Strategy<Value = Mode> {
    prop_oneof![Just(Mode::Deploy), Just(Mode::Test)]
}

/// Independent acceptance check on whatever the agent emitted.
pub fn emitted_is_valid(cat: &Catalog, cfg: &EmittedConfig) -> bool {
    match cfg {
        EmittedConfig::Deployment(s) => {
            Role::ALL.iter().all(|r| cat.lookup(*r, s.name_of(*r)).is_some()) && cat.validate(&s.selection()).is_ok_and(|r| r.is_valid())
        }
        EmittedConfig::Test(t) => {
            let text = t.to_json();
            serde_json::from_str::<Value>(&text).is_ok_and(|v| TestSpec::from_value(&v, cat.test_parameters()).is_ok_and(|back| back == *t))
        }
    }
}

/// A table for `mode`, drawn from that mode's paths.
pub fn table() -> impl Strategy<Value = (Mode, Vec<ScriptStep>)> {
    mode().prop_flat_map(|m| (Just(m), prop::collection::vec(step(m), 0..24)))
}

/// A junk prefix followed by enough feedback-driven turns to converge.
pub fn convergent_table() -> impl Strategy<Value = (Mode, Vec<ScriptStep>)> {
    mode().prop_flat_map(|m| {
        (Just(m), prop::collection::vec(step(m), 0..6)).prop_map(|(m, mut t)| {
            t.extend(std::iter::repeat_n(ScriptStep::CompleteFromFeedback, 7));
            (m, t)
        })
    })
}

/// Runs a table and checks budgets plus the validity of anything emitted.
/// Returns whether the run succeeded.
pub fn check_table(cat: &Catalog, mode: Mode, table: &[ScriptStep]) -> Result<bool, String> {
    let budgets = Budgets::default();
    let out = run_intent(cat, "randomized", mode, &mut ScriptedBackend::new(table.to_vec()), budgets);
    if out.metrics.iterations > budgets.max_iterations {
        return Err(format!("{} iterations", out.metrics.iterations));
    }
    if out.metrics.runtime_s > budgets.wall.as_secs_f64() + 1e-9 {
        return Err(format!("ran {} s", out.metrics.runtime_s));
    }
    if out.metrics.success != out.config.is_some() {
        return Err("success flag disagrees with the emitted config".into());
    }
    if let Some(cfg) = &out.config {
        if !emitted_is_valid(cat, cfg) {
            return Err(format!("emitted an invalid config: {cfg:?}"));
        }
    }
    Ok(out.metrics.success)
}
