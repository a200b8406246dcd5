use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::json::{as_object, parse_text, Fields};
use super::{to_pretty, ConfigError};
use crate::catalog::{Catalog, ParameterKind, TestParameterGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestType {
    Iperf,
    Mgen,
}

impl TestType {
    pub fn as_str(self) -> &'static str {
        match self {
            TestType::Iperf => "iperf",
            TestType::Mgen => "mgen",
        }
    }
}

impl fmt::Display for TestType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Udp,
    Tcp,
}

/// MGEN traffic pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    Periodic,
    Poisson,
    Burst,
}

/// Traffic parameters for one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeSpec {
    pub slice_id: u32,
    pub test_type: TestType,
    pub bandwidth_mbps: f64,
    /// Seconds.
    pub duration: u32,
    pub protocol: Protocol,
    /// iPerf only: server sends (downlink) when true.
    pub reverse: Option<bool>,
    pub json_output: Option<bool>,
    /// MGEN only.
    pub distribution: Option<Distribution>,
    pub server_hostname: String,
    pub server_port: u16,
}

impl UeSpec {
    /// Downlink unless an uplink iPerf run was requested.
    pub fn is_downlink(&self) -> bool {
        self.reverse.unwrap_or(true)
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("slice_id".into(), json!(self.slice_id));
        m.insert("test_type".into(), json!(self.test_type));
        m.insert("bandwidth_mbps".into(), json!(self.bandwidth_mbps));
        m.insert("duration".into(), json!(self.duration));
        m.insert("protocol".into(), json!(self.protocol));
        if let Some(r) = self.reverse {
            m.insert("reverse".into(), json!(r));
        }
        if let Some(j) = self.json_output {
            m.insert("json_output".into(), json!(j));
        }
        if let Some(d) = self.distribution {
            m.insert("distribution".into(), json!(d));
        }
        m.insert("server_hostname".into(), json!(self.server_hostname));
        m.insert("server_port".into(), json!(self.server_port));
        Value::Object(m)
    }

    /// Parses one UE entry, checking generator membership before types so a
    /// misplaced parameter is reported as such.
    pub fn from_value(v: &Value, path: &str, graph: &TestParameterGraph) -> Result<Self, ConfigError> {
        let obj = as_object(v, path)?;
        for key in obj.keys() {
            if !graph.parameters.contains_key(key) {
                return Err(ConfigError::Schema { path: format!("{path}.{key}"), message: "unknown key".into() });
            }
        }
        let mut f = Fields::new(v, path)?;
        let test_type: TestType = enum_field(&mut f, "test_type")?;
        for key in obj.keys() {
            if !graph.allows(test_type.as_str(), key) {
                return Err(ConfigError::ParamMismatch { path: format!("{path}.{key}"), generator: test_type.to_string() });
            }
        }
        for key in &graph.required {
            if !obj.contains_key(key) {
                return Err(ConfigError::Schema { path: format!("{path}.{key}"), message: "missing required key".into() });
            }
        }
        for (key, value) in obj {
            let spec = &graph.parameters[key];
            let type_ok = match spec.kind {
                ParameterKind::Integer => value.is_i64() || value.is_u64(),
                ParameterKind::Number => value.is_number(),
                ParameterKind::Boolean => value.is_boolean(),
                ParameterKind::String | ParameterKind::Enum => value.is_string(),
            };
            if !type_ok {
                return Err(ConfigError::Type { path: format!("{path}.{key}"), expected: kind_name(spec.kind) });
            }
            spec.check(value).map_err(|message| ConfigError::Range { path: format!("{path}.{key}"), message })?;
        }
        let slice_id = f.req_int("slice_id")?;
        let bandwidth_mbps = f.req_number("bandwidth_mbps")?;
        let duration = f.req_int("duration")?;
        let protocol = enum_field(&mut f, "protocol")?;
        let reverse = f.opt_bool("reverse")?;
        let json_output = f.opt_bool("json_output")?;
        let distribution = match f.opt("distribution") {
            Some(_) => Some(enum_field(&mut f, "distribution")?),
            None => None,
        };
        let server_hostname = f.req_str("server_hostname")?;
        let server_port = f.req_int("server_port")?;
        f.finish()?;
        let range = |key: &str, message: &str| ConfigError::Range { path: format!("{path}.{key}"), message: message.into() };
        if !(bandwidth_mbps > 0.0 && bandwidth_mbps.is_finite()) {
            return Err(range("bandwidth_mbps", "must be > 0"));
        }
        if duration <= 0 || duration > u32::MAX as i64 {
            return Err(range("duration", "must be > 0"));
        }
        if !(1..=65535).contains(&server_port) {
            return Err(range("server_port", "must be in 1..=65535"));
        }
        if !(0..=u32::MAX as i64).contains(&slice_id) {
            return Err(range("slice_id", "must be >= 0"));
        }
        Ok(Self {
            slice_id: slice_id as u32,
            test_type,
            bandwidth_mbps,
            duration: duration as u32,
            protocol,
            reverse,
            json_output,
            distribution,
            server_hostname,
            server_port: server_port as u16,
        })
    }
}

fn kind_name(kind: ParameterKind) -> &'static str {
    match kind {
        ParameterKind::Integer => "integer",
        ParameterKind::Number => "number",
        ParameterKind::Boolean => "boolean",
        ParameterKind::String => "string",
        ParameterKind::Enum => "string enum",
    }
}

fn enum_field<T: serde::de::DeserializeOwned>(f: &mut Fields<'_>, key: &str) -> Result<T, ConfigError> {
    let v = f.req(key)?;
    serde_json::from_value(v.clone()).map_err(|e| ConfigError::Range { path: f.child(key), message: e.to_string() })
}

/// Test request against one deployed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSpec {
    pub scenario_id: u32,
    pub ue_specifications: Vec<UeSpec>,
}

impl TestSpec {
    pub fn to_value(&self) -> Value {
        json!({
            "network_scenario": {
                "id": self.scenario_id,
                "ue_specification": self.ue_specifications.iter().map(UeSpec::to_value).collect::<Vec<_>>(),
            }
        })
    }

    pub fn to_json(&self) -> String {
        to_pretty(&self.to_value())
    }

    /// Longest per-UE traffic duration, in seconds.
    pub fn duration_s(&self) -> u32 {
        self.ue_specifications.iter().map(|u| u.duration).max().unwrap_or(0)
    }

    pub fn from_value(v: &Value, graph: &TestParameterGraph) -> Result<Self, ConfigError> {
        let mut top = Fields::new(v, "")?;
        let body = top.req("network_scenario")?;
        top.finish()?;
        let mut f = Fields::new(body, "network_scenario")?;
        let id = f.req_int("id")?;
        if id < 1 || id > u32::MAX as i64 {
            return Err(ConfigError::Range { path: f.child("id"), message: "scenario id must be >= 1".into() });
        }
        let list_path = f.child("ue_specification");
        let list = f.req("ue_specification")?.as_array().ok_or(ConfigError::Type { path: list_path.clone(), expected: "array" })?;
        f.finish()?;
        if list.is_empty() {
            return Err(ConfigError::Schema { path: list_path, message: "at least one UE specification is required".into() });
        }
        let ue_specifications = list
            .iter()
            .enumerate()
            .map(|(i, v)| UeSpec::from_value(v, &format!("{list_path}[{i}]"), graph))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { scenario_id: id as u32, ue_specifications })
    }
}

/// Parses a test file using the seed catalog's generator parameter tables.
pub fn parse_test_file(text: &str) -> Result<TestSpec, ConfigError> {
    parse_test_file_with(text, Catalog::seeded().test_parameters())
}

pub fn parse_test_file_with(text: &str, graph: &TestParameterGraph) -> Result<TestSpec, ConfigError> {
    TestSpec::from_value(&parse_text(text)?, graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = include_str!("../../tests/fixtures/test_iperf.json");

    #[test]
    fn parses_reference_listing() {
        let t = parse_test_file(LISTING).unwrap();
        assert_eq!(t.scenario_id, 1);
        assert_eq!(t.ue_specifications.len(), 1);
        let ue = &t.ue_specifications[0];
        assert_eq!(ue.bandwidth_mbps, 25.0);
        assert_eq!(ue.protocol, Protocol::Udp);
        assert_eq!(ue.reverse, Some(true));
        assert_eq!(ue.server_port, 32201);
        assert_eq!(ue.duration, 60);
        assert!(ue.is_downlink());
    }

    #[test]
    fn range_errors() {
        let zero = LISTING.replace("\"duration\": 60", "\"duration\": 0");
        assert!(matches!(parse_test_file(&zero), Err(ConfigError::Range { ref path, .. }) if path.ends_with("duration")));
        let bw = LISTING.replace("\"bandwidth_mbps\": 25", "\"bandwidth_mbps\": -1");
        assert!(matches!(parse_test_file(&bw), Err(ConfigError::Range { .. })));
        let port = LISTING.replace("32201", "70000");
        assert!(matches!(parse_test_file(&port), Err(ConfigError::Range { .. })));
    }

    #[test]
    fn mgen_parameter_under_iperf_is_mismatch() {
        let bad = LISTING.replace("\"slice_id\": 1,", "\"slice_id\": 1, \"distribution\": \"poisson\",");
        let err = parse_test_file(&bad).unwrap_err();
        assert!(matches!(err, ConfigError::ParamMismatch { ref generator, .. } if generator == "iperf"), "{err}");
    }

    #[test]
    fn mgen_spec_accepts_distribution_and_rejects_reverse() {
        let mgen = LISTING
            .replace("\"iperf\"", "\"mgen\"")
            .replace("\"reverse\": true,", "\"distribution\": \"poisson\",")
            .replace("\"json_output\": true,", "");
        let t = parse_test_file(&mgen).unwrap();
        assert_eq!(t.ue_specifications[0].distribution, Some(Distribution::Poisson));
        let bad = LISTING.replace("\"iperf\"", "\"mgen\"");
        assert!(matches!(parse_test_file(&bad), Err(ConfigError::ParamMismatch { .. })));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_test_file("{}"), Err(ConfigError::Schema { .. })));
        let empty = r#"{"network_scenario": {"id": 1, "ue_specification": []}}"#;
        assert!(matches!(parse_test_file(empty), Err(ConfigError::Schema { .. })));
        let typo = LISTING.replace("bandwidth_mbps", "bandwidt_mbps");
        assert!(matches!(parse_test_file(&typo), Err(ConfigError::Schema { .. })));
        assert!(matches!(parse_test_file("{not json"), Err(ConfigError::Syntax(_))));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let t = parse_test_file(LISTING).unwrap();
        let text = t.to_json();
        let again = parse_test_file(&text).unwrap();
        assert_eq!(again, t);
        assert_eq!(again.to_json(), text);
    }
}
