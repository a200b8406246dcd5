use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::Mode;
use crate::catalog::{Catalog, Role, Selection, ValidationStatus};
use crate::config::{NetworkScenario, TestSpec};

/// Test fields the agent must fill itself; the rest fall back to the
/// parameter defaults in the catalog.
pub const TEST_REQUIRED: [&str; 3] = ["test_type", "bandwidth_mbps", "ue_count"];
const MAX_UES: i64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Filling,
    Validating,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    UnknownPath,
    IllegalValue,
    NotAllowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<Rejection>,
    pub message: String,
}

impl ToolResult {
    fn accepted(tool: &str, message: String) -> Self {
        Self { tool: tool.into(), ok: true, rejection: None, message }
    }

    fn rejected(tool: &str, rejection: Rejection, message: String) -> Self {
        Self { tool: tool.into(), ok: false, rejection: Some(rejection), message }
    }
}

/// Validation outcome in either mode. Deploy-mode reports mirror the
/// catalog's; test-mode reports come from the test-file validator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub status: ValidationStatus,
    pub missing: Vec<String>,
    pub conflicts: Vec<String>,
    /// Legal values for every missing or conflicting field.
    pub allowed: BTreeMap<String, Vec<String>>,
    pub message: String,
}

impl AgentReport {
    pub fn is_valid(&self) -> bool {
        self.status == ValidationStatus::Valid
    }
}

/// A configuration that passed validation.
#[derive(Debug, Clone, PartialEq)]
pub enum EmittedConfig {
    Deployment(NetworkScenario),
    Test(TestSpec),
}

impl EmittedConfig {
    pub fn to_json(&self) -> String {
        match self {
            EmittedConfig::Deployment(s) => s.to_json(),
            EmittedConfig::Test(t) => t.to_json(),
        }
    }

    /// Flat view used by corpus predicates: role names for deployments,
    /// parameters of the first UE plus `ue_count` for tests.
    pub fn fields(&self) -> BTreeMap<String, Value> {
        let mut m = BTreeMap::new();
        match self {
            EmittedConfig::Deployment(s) => {
                for r in Role::ALL {
                    m.insert(r.as_str().to_owned(), json!(s.name_of(r)));
                }
                m.insert("id".into(), json!(s.id));
            }
            EmittedConfig::Test(t) => {
                m.insert("scenario_id".into(), json!(t.scenario_id));
                m.insert("ue_count".into(), json!(t.ue_specifications.len()));
                if let Some(Value::Object(first)) = t.ue_specifications.first().map(|u| u.to_value()) {
                    m.extend(first);
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct DeployDraft {
    selection: Selection,
    id: Option<u32>,
    ru_location: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct TestDraft {
    params: BTreeMap<String, Value>,
    ue_count: Option<u32>,
    scenario_id: Option<u32>,
}

/// Working configuration plus the two tools that edit and check it.
#[derive(Debug, Clone)]
pub struct Session<'c> {
    catalog: &'c Catalog,
    pub mode: Mode,
    pub phase: Phase,
    deploy: DeployDraft,
    test: TestDraft,
}

impl<'c> Session<'c> {
    pub fn new(catalog: &'c Catalog, mode: Mode) -> Self {
        Self { catalog, mode, phase: Phase::Filling, deploy: DeployDraft::default(), test: TestDraft::default() }
    }

    /// Current working values as a flat JSON object.
    pub fn working(&self) -> Value {
        let mut m = Map::new();
        match self.mode {
            Mode::Deploy => {
                for (r, n) in &self.deploy.selection {
                    m.insert(r.as_str().into(), json!(n));
                }
                if let Some(id) = self.deploy.id {
                    m.insert("id".into(), json!(id));
                }
                if let Some(l) = self.deploy.ru_location {
                    m.insert("ru.location".into(), json!(l));
                }
            }
            Mode::Test => {
                for (k, v) in &self.test.params {
                    m.insert(k.clone(), v.clone());
                }
                if let Some(n) = self.test.ue_count {
                    m.insert("ue_count".into(), json!(n));
                }
                if let Some(id) = self.test.scenario_id {
                    m.insert("scenario_id".into(), json!(id));
                }
            }
        }
        Value::Object(m)
    }

    /// Paths `set_parameter` accepts in this mode.
    pub fn known_paths(&self) -> Vec<String> {
        match self.mode {
            Mode::Deploy => Role::ALL.iter().map(|r| r.as_str().to_owned()).chain(["id".into(), "ru.location".into()]).collect(),
            Mode::Test => self.catalog.test_parameters().parameters.keys().cloned().chain(["ue_count".into(), "scenario_id".into()]).collect(),
        }
    }

    fn missing(&self) -> Vec<String> {
        match self.mode {
            Mode::Deploy => Role::ALL.iter().filter(|r| !self.deploy.selection.contains_key(r)).map(|r| r.as_str().to_owned()).collect(),
            Mode::Test => TEST_REQUIRED
                .iter()
                .filter(|k| match **k {
                    "ue_count" => self.test.ue_count.is_none(),
                    k => !self.test.params.contains_key(k),
                })
                .map(|k| (*k).to_owned())
                .collect(),
        }
    }

    fn refresh_phase(&mut self) {
        if self.phase == Phase::Done || self.phase == Phase::Failed {
            return;
        }
        self.phase = if self.missing().is_empty() { Phase::Validating } else { Phase::Filling };
    }

    /// Stores `value` under `name` if both are legal. A `null` value clears
    /// the field. Every failure comes back as a rejection.
    pub fn set_parameter(&mut self, name: &str, value: &Value) -> ToolResult {
        let r = match self.mode {
            Mode::Deploy => self.set_deploy(name, value),
            Mode::Test => self.set_test(name, value),
        };
        if r.ok && self.phase == Phase::Done {
            self.phase = Phase::Validating;
        }
        self.refresh_phase();
        r
    }

    fn set_deploy(&mut self, name: &str, value: &Value) -> ToolResult {
        const T: &str = "set_parameter";
        match name {
            "id" | "scenario_id" => {
                return match value.as_u64().filter(|v| (1..=u32::MAX as u64).contains(v)) {
                    Some(v) => {
                        self.deploy.id = Some(v as u32);
                        ToolResult::accepted(T, format!("id = {v}"))
                    }
                    None => ToolResult::rejected(T, Rejection::IllegalValue, "id: expected an integer >= 1".into()),
                };
            }
            "ru.location" | "location" => {
                return match value {
                    Value::Null => {
                        self.deploy.ru_location = None;
                        ToolResult::accepted(T, "ru.location cleared".into())
                    }
                    v => match v.as_i64() {
                        Some(l) => {
                            self.deploy.ru_location = Some(l);
                            ToolResult::accepted(T, format!("ru.location = {l}"))
                        }
                        None => ToolResult::rejected(T, Rejection::IllegalValue, "ru.location: expected an integer".into()),
                    },
                };
            }
            _ => {}
        }
        let Some(role) = Role::parse(name) else {
            return ToolResult::rejected(T, Rejection::UnknownPath, format!("unknown parameter `{name}`; known: {}", self.known_paths().join(", ")));
        };
        let component = match value {
            Value::Null => {
                self.deploy.selection.remove(&role);
                return ToolResult::accepted(T, format!("{role} cleared"));
            }
            Value::String(s) => s.trim().to_ascii_lowercase(),
            _ => return ToolResult::rejected(T, Rejection::IllegalValue, format!("{role}: expected a component name")),
        };
        if self.catalog.lookup(role, &component).is_none() {
            let known: Vec<String> = self.catalog.components_of(role).map(|c| c.name.clone()).collect();
            return ToolResult::rejected(T, Rejection::IllegalValue, format!("{role}: unknown component `{component}`; known: {}", known.join(", ")));
        }
        let allowed = self.catalog.allowed_values(role, &self.deploy.selection);
        if !allowed.contains(&component) {
            let id = &self.catalog.lookup(role, &component).expect("checked").id;
            let clashes: Vec<String> = self
                .deploy
                .selection
                .iter()
                .filter(|(r, _)| **r != role)
                .filter(|(r, n)| self.catalog.lookup(**r, n).is_none_or(|c| !self.catalog.graph().contains(id, &c.id)))
                .map(|(r, n)| format!("{r}={n}"))
                .collect();
            let list: Vec<&str> = allowed.iter().map(String::as_str).collect();
            return ToolResult::rejected(
                T,
                Rejection::NotAllowed,
                format!("{role}={component} is incompatible with {}; allowed {role}: [{}]", clashes.join(", "), list.join(", ")),
            );
        }
        let mut next = self.deploy.selection.clone();
        next.insert(role, component.clone());
        if !self.catalog.has_completion(&next) {
            let list: Vec<String> = self.catalog.completable_values(role, &self.deploy.selection).into_iter().collect();
            return ToolResult::rejected(
                T,
                Rejection::NotAllowed,
                format!("{role}={component} leaves no valid choice for the remaining roles; allowed {role}: [{}]", list.join(", ")),
            );
        }
        self.deploy.selection = next;
        ToolResult::accepted(T, format!("{role} = {component}"))
    }

    fn set_test(&mut self, name: &str, value: &Value) -> ToolResult {
        const T: &str = "set_parameter";
        let graph = self.catalog.test_parameters();
        match name {
            "ue_count" => {
                return match value.as_i64().filter(|n| (1..=MAX_UES).contains(n)) {
                    Some(n) => {
                        self.test.ue_count = Some(n as u32);
                        ToolResult::accepted(T, format!("ue_count = {n}"))
                    }
                    None => ToolResult::rejected(T, Rejection::IllegalValue, format!("ue_count: expected an integer in 1..={MAX_UES}")),
                };
            }
            "scenario_id" | "id" => {
                return match value.as_u64().filter(|v| (1..=u32::MAX as u64).contains(v)) {
                    Some(v) => {
                        self.test.scenario_id = Some(v as u32);
                        ToolResult::accepted(T, format!("scenario_id = {v}"))
                    }
                    None => ToolResult::rejected(T, Rejection::IllegalValue, "scenario_id: expected an integer >= 1".into()),
                };
            }
            _ => {}
        }
        let Some(spec) = graph.parameters.get(name) else {
            return ToolResult::rejected(T, Rejection::UnknownPath, format!("unknown parameter `{name}`; known: {}", self.known_paths().join(", ")));
        };
        if value.is_null() {
            self.test.params.remove(name);
            return ToolResult::accepted(T, format!("{name} cleared"));
        }
        if let Err(e) = spec.check(value) {
            return ToolResult::rejected(T, Rejection::IllegalValue, format!("{name}: {e}"));
        }
        if name == "test_type" {
            let generator = value.as_str().expect("enum values are strings");
            let bad: Vec<&str> = self.test.params.keys().map(String::as_str).filter(|p| *p != "test_type" && !graph.allows(generator, p)).collect();
            if !bad.is_empty() {
                return ToolResult::rejected(T, Rejection::NotAllowed, format!("{} not valid for test type {generator}", bad.join(", ")));
            }
        } else {
            let ok = match self.test.params.get("test_type").and_then(Value::as_str) {
                Some(g) => graph.allows(g, name),
                None => !graph.generators_accepting(self.test.params.keys().map(String::as_str).chain([name])).is_empty(),
            };
            if !ok {
                let message = match self.test.params.get("test_type").and_then(Value::as_str) {
                    Some(g) => format!("{name} is not valid for test type {g}"),
                    None => {
                        let set: Vec<&str> = self.test.params.keys().map(String::as_str).collect();
                        format!("no test type accepts {name} together with {}", set.join(", "))
                    }
                };
                return ToolResult::rejected(T, Rejection::NotAllowed, message);
            }
        }
        self.test.params.insert(name.to_owned(), value.clone());
        ToolResult::accepted(T, format!("{name} = {value}"))
    }

    /// Checks the working configuration. A valid report moves the session to
    /// `Done`.
    pub fn validate(&mut self) -> AgentReport {
        let report = self.check();
        if report.is_valid() {
            self.phase = Phase::Done;
        } else {
            self.refresh_phase();
        }
        report
    }

    /// Same report as `validate`, without touching the phase.
    pub fn check(&self) -> AgentReport {
        match self.mode {
            Mode::Deploy => self.validate_deploy(),
            Mode::Test => self.validate_test(),
        }
    }

    fn validate_deploy(&self) -> AgentReport {
        let cat = self.catalog;
        let report = match cat.validate(&self.deploy.selection) {
            Ok(r) => r,
            // set_parameter only stores known names
            Err(e) => unreachable!("working selection holds an unknown name: {e}"),
        };
        let mut allowed = BTreeMap::new();
        let mut open: BTreeSet<Role> = report.missing_roles.iter().copied().collect();
        for c in &report.conflicts {
            open.insert(c.left_role);
            open.insert(c.right_role);
        }
        for r in open {
            allowed.insert(r.as_str().to_owned(), cat.completable_values(r, &self.deploy.selection).into_iter().collect());
        }
        let name = |id: &str| cat.get(id).map_or(id.to_owned(), |c| c.name.clone());
        AgentReport {
            status: report.status,
            missing: report.missing_roles.iter().map(|r| r.as_str().to_owned()).collect(),
            conflicts: report.conflicts.iter().map(|c| format!("{}={} x {}={}", c.left_role, name(&c.left), c.right_role, name(&c.right))).collect(),
            allowed,
            message: report.message,
        }
    }

    fn validate_test(&self) -> AgentReport {
        let graph = self.catalog.test_parameters();
        let missing = self.missing();
        let mut allowed = BTreeMap::new();
        for m in &missing {
            let domain = match graph.parameters.get(m) {
                // only generators that take every parameter already set
                Some(_) if m == "test_type" => graph.generators_accepting(self.test.params.keys().map(String::as_str)).into_iter().map(str::to_owned).collect(),
                Some(spec) if !spec.values.is_empty() => spec.values.clone(),
                // the default first, so it can be used as is
                Some(spec) => spec.default.iter().map(|d| d.to_string()).chain([spec.describe()]).collect(),
                None => vec!["1".into(), format!("integer in 1..={MAX_UES}")],
            };
            allowed.insert(m.clone(), domain);
        }
        if !missing.is_empty() {
            let message = format!("missing values for: {}", missing.join(", "));
            return AgentReport { status: ValidationStatus::MissingValues, missing, conflicts: Vec::new(), allowed, message };
        }
        match self.build_test() {
            Ok(_) => {
                AgentReport { status: ValidationStatus::Valid, missing, conflicts: Vec::new(), allowed, message: "configuration is valid".into() }
            }
            Err(e) => {
                AgentReport { status: ValidationStatus::Incompatible, missing, conflicts: vec![e.to_string()], allowed, message: e.to_string() }
            }
        }
    }

    fn build_test(&self) -> Result<TestSpec, crate::config::ConfigError> {
        let graph = self.catalog.test_parameters();
        let generator = self.test.params.get("test_type").and_then(Value::as_str).unwrap_or("iperf");
        let mut ue = Map::new();
        for (k, spec) in &graph.parameters {
            if !graph.allows(generator, k) {
                continue;
            }
            if let Some(v) = self.test.params.get(k).or(spec.default.as_ref()) {
                ue.insert(k.clone(), v.clone());
            }
        }
        let n = self.test.ue_count.unwrap_or(1) as usize;
        let doc = json!({
            "network_scenario": {
                "id": self.test.scenario_id.unwrap_or(1),
                "ue_specification": vec![Value::Object(ue); n],
            }
        });
        TestSpec::from_value(&doc, graph)
    }

    /// The validated configuration, only once the session is `Done`.
    pub fn emit(&self) -> Option<EmittedConfig> {
        if self.phase != Phase::Done {
            return None;
        }
        match self.mode {
            Mode::Deploy => {
                if !self.catalog.validate(&self.deploy.selection).ok()?.is_valid() {
                    return None;
                }
                let mut s = NetworkScenario::from_selection(self.deploy.id.unwrap_or(1), &self.deploy.selection)?;
                s.ru.location = self.deploy.ru_location;
                Some(EmittedConfig::Deployment(s))
            }
            Mode::Test => self.build_test().ok().map(EmittedConfig::Test),
        }
    }
}

/// Renders a failed report (and the last tool results) as the next prompt.
/// Identical inputs give identical text.
pub fn build_feedback(report: &AgentReport, results: &[ToolResult]) -> String {
    debug_assert!(!report.is_valid(), "feedback is only built for failed reports");
    let mut s = String::new();
    let status = serde_json::to_value(report.status).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
    let _ = writeln!(s, "Validation status: {status}");
    if !report.missing.is_empty() {
        let _ = writeln!(s, "Missing fields: {}", report.missing.join(", "));
    }
    for c in &report.conflicts {
        let _ = writeln!(s, "Conflict: {c}");
    }
    if !report.allowed.is_empty() {
        let _ = writeln!(s, "Allowed values:");
        for (k, v) in &report.allowed {
            let _ = writeln!(s, "  {k}: [{}]", v.join(", "));
        }
    }
    let rejected: Vec<&ToolResult> = results.iter().filter(|r| !r.ok).collect();
    if !rejected.is_empty() {
        let _ = writeln!(s, "Rejected calls:");
        for r in rejected {
            let _ = writeln!(s, "  {}", r.message);
        }
    }
    s.push_str("Call set_parameter for each open field, then call validate.");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_rejects_incompatible_and_unknown() {
        let cat = Catalog::seeded();
        let mut s = Session::new(&cat, Mode::Deploy);
        assert!(s.set_parameter("du_high", &json!("oai")).ok);
        assert!(s.set_parameter("du_low", &json!("cubb")).ok);
        let mut s = Session::new(&cat, Mode::Deploy);
        s.set_parameter("du_high", &json!("srsran"));
        let r = s.set_parameter("du_low", &json!("cubb"));
        assert_eq!(r.rejection, Some(Rejection::NotAllowed));
        assert!(r.message.contains("incompatible with du_high=srsran"), "{}", r.message);
        let mut t = Session::new(&cat, Mode::Test);
        assert_eq!(t.set_parameter("bandwidt_mbps", &json!(25)).rejection, Some(Rejection::UnknownPath));
    }

    #[test]
    fn validate_walks_phases() {
        let cat = Catalog::seeded();
        let mut s = Session::new(&cat, Mode::Deploy);
        for (k, v) in [("core", "open5gs"), ("cu", "oai"), ("du_high", "oai"), ("du_low", "cubb")] {
            s.set_parameter(k, &json!(v));
        }
        let r = s.validate();
        assert_eq!(r.missing, vec!["ru"]);
        assert_eq!(r.allowed["ru"], vec!["foxconn", "rusim"]);
        assert!(build_feedback(&r, &[]).contains("ru: [foxconn, rusim]"));
        assert_eq!(s.phase, Phase::Filling);
        assert!(s.emit().is_none());
        s.set_parameter("ru", &json!("foxconn"));
        assert_eq!(s.phase, Phase::Validating);
        assert!(s.validate().is_valid());
        assert_eq!(s.phase, Phase::Done);
        assert!(matches!(s.emit(), Some(EmittedConfig::Deployment(_))));
    }

    #[test]
    fn test_mode_builds_spec_with_defaults() {
        let cat = Catalog::seeded();
        let mut s = Session::new(&cat, Mode::Test);
        s.set_parameter("test_type", &json!("iperf"));
        s.set_parameter("bandwidth_mbps", &json!(15));
        s.set_parameter("ue_count", &json!(3));
        assert_eq!(s.set_parameter("distribution", &json!("poisson")).rejection, Some(Rejection::NotAllowed));
        assert!(s.validate().is_valid());
        let Some(EmittedConfig::Test(t)) = s.emit() else { panic!() };
        assert_eq!(t.ue_specifications.len(), 3);
        assert!(t.ue_specifications.iter().all(|u| u.bandwidth_mbps == 15.0 && u.duration == 60));
    }
}
