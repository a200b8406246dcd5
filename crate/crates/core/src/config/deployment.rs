use serde_json::{json, Value};

use super::json::{parse_text, Fields};
use super::{to_pretty, ConfigError};
use crate::catalog::{Catalog, Role, Selection};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoreRef {
    pub name: String,
}

/// A stack component plus its configuration file. `None` means the
/// component's own defaults are used.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComponentRef {
    pub name: String,
    pub config_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RuRef {
    pub name: String,
    pub location: Option<i64>,
    pub config_file: Option<String>,
}

/// A declarative deployment request, one component per role.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkScenario {
    pub id: u32,
    pub core_network: CoreRef,
    pub cu: ComponentRef,
    pub du_high: ComponentRef,
    pub du_low: ComponentRef,
    pub ru: RuRef,
}

impl NetworkScenario {
    pub fn name_of(&self, role: Role) -> &str {
        match role {
            Role::Core => &self.core_network.name,
            Role::Cu => &self.cu.name,
            Role::DuHigh => &self.du_high.name,
            Role::DuLow => &self.du_low.name,
            Role::Ru => &self.ru.name,
        }
    }

    pub fn selection(&self) -> Selection {
        Role::ALL.iter().map(|r| (*r, self.name_of(*r).to_owned())).collect()
    }

    /// Builds a scenario from a complete selection, with no config files.
    pub fn from_selection(id: u32, sel: &Selection) -> Option<Self> {
        let get = |r: Role| sel.get(&r).cloned();
        let bare = |name: String| ComponentRef { name, config_file: None };
        Some(Self {
            id,
            core_network: CoreRef { name: get(Role::Core)? },
            cu: bare(get(Role::Cu)?),
            du_high: bare(get(Role::DuHigh)?),
            du_low: bare(get(Role::DuLow)?),
            ru: RuRef { name: get(Role::Ru)?, location: None, config_file: None },
        })
    }

    pub fn to_value(&self) -> Value {
        let comp = |c: &ComponentRef| json!({ "name": c.name, "config_file": c.config_file });
        json!({
            "network_scenario": {
                "id": self.id,
                "core_network": { "name": self.core_network.name },
                "cu": comp(&self.cu),
                "du-high": comp(&self.du_high),
                "du-low": comp(&self.du_low),
                "ru": {
                    "name": self.ru.name,
                    "location": self.ru.location,
                    "config_file": self.ru.config_file,
                },
            }
        })
    }

    /// Pretty JSON with sorted keys; `du-low: "none"` stays literal.
    pub fn to_json(&self) -> String {
        to_pretty(&self.to_value())
    }

    /// Schema-only parse: no catalog lookup.
    pub fn from_value(v: &Value) -> Result<Self, ConfigError> {
        let mut top = Fields::new(v, "")?;
        let body = top.req("network_scenario")?;
        top.finish()?;
        let mut f = Fields::new(body, "network_scenario")?;
        let id = f.req_int("id")?;
        if id < 1 || id > u32::MAX as i64 {
            return Err(ConfigError::Range { path: f.child("id"), message: "scenario id must be >= 1".into() });
        }
        let core_network = {
            let path = f.child("core_network");
            let mut c = Fields::new(f.req("core_network")?, &path)?;
            let name = c.req_str("name")?;
            c.finish()?;
            CoreRef { name }
        };
        let mut component = |key: &str| -> Result<ComponentRef, ConfigError> {
            let path = f.child(key);
            let mut c = Fields::new(f.req(key)?, &path)?;
            let name = c.req_str("name")?;
            let config_file = c.opt_str("config_file")?;
            c.finish()?;
            Ok(ComponentRef { name, config_file })
        };
        let cu = component("cu")?;
        let du_high = component("du-high")?;
        let du_low = component("du-low")?;
        let ru = {
            let path = f.child("ru");
            let mut c = Fields::new(f.req("ru")?, &path)?;
            let name = c.req_str("name")?;
            let location = c.opt_int("location")?;
            let config_file = c.opt_str("config_file")?;
            c.finish()?;
            RuRef { name, location, config_file }
        };
        f.finish()?;
        Ok(Self { id: id as u32, core_network, cu, du_high, du_low, ru })
    }
}

/// Parses a deployment file and checks it against the catalog: every name
/// must resolve for its role and the selection must be graph-valid.
pub fn parse_deployment_file(text: &str, catalog: &Catalog) -> Result<NetworkScenario, ConfigError> {
    let scenario = NetworkScenario::from_value(&parse_text(text)?)?;
    for role in Role::ALL {
        catalog.resolve(role, scenario.name_of(role)).map_err(|source| ConfigError::Catalog {
            path: format!("network_scenario.{}.name", role.file_key()),
            source,
        })?;
    }
    let report = catalog
        .validate(&scenario.selection())
        .map_err(|source| ConfigError::Catalog { path: "network_scenario".into(), source })?;
    if !report.is_valid() {
        return Err(ConfigError::Incompatible(report));
    }
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = include_str!("../../tests/fixtures/deployment.json");

    #[test]
    fn parses_reference_listing() {
        let cat = Catalog::seeded();
        let s = parse_deployment_file(LISTING, &cat).unwrap();
        assert_eq!(s.id, 1);
        assert_eq!(s.ru.location, Some(660));
        assert_eq!(s.du_low.name, "cubb");
        assert_eq!(s.du_low.config_file.as_deref(), Some("cubb_100_2x2.yaml"));
        assert_eq!(s.du_high.config_file, None);
        assert_eq!(s.core_network.name, "open5gs");
    }

    #[test]
    fn rejects_empty_object() {
        let err = parse_deployment_file("{}", &Catalog::seeded()).unwrap_err();
        assert!(matches!(err, ConfigError::Schema { ref path, .. } if path == "network_scenario"), "{err}");
    }

    #[test]
    fn rejects_unknown_and_mistyped_keys() {
        let cat = Catalog::seeded();
        let extra = LISTING.replace("\"location\": 660,", "\"location\": 660, \"colour\": \"red\",");
        let err = parse_deployment_file(&extra, &cat).unwrap_err();
        assert_eq!(err.path(), Some("network_scenario.ru.colour"));
        let typed = LISTING.replace("\"location\": 660", "\"location\": \"660\"");
        assert!(matches!(parse_deployment_file(&typed, &cat), Err(ConfigError::Type { .. })));
        let zero = LISTING.replace("\"id\": 1", "\"id\": 0");
        assert!(matches!(parse_deployment_file(&zero, &cat), Err(ConfigError::Range { .. })));
    }

    #[test]
    fn rejects_unknown_component_name() {
        let bad = LISTING.replacen("\"name\": \"oai\"", "\"name\": \"xyz\"", 1);
        let err = parse_deployment_file(&bad, &Catalog::seeded()).unwrap_err();
        assert_eq!(err.path(), Some("network_scenario.cu.name"));
        assert!(matches!(err, ConfigError::Catalog { .. }));
    }

    #[test]
    fn rejects_incompatible_pair() {
        let bad = LISTING.replace("\"oai\"", "\"srsran\"");
        let err = parse_deployment_file(&bad, &Catalog::seeded()).unwrap_err();
        let ConfigError::Incompatible(report) = err else { panic!("{err:?}") };
        assert!(report.message.contains("srsran"));
    }

    #[test]
    fn serialization_round_trips() {
        let cat = Catalog::seeded();
        let s = parse_deployment_file(LISTING, &cat).unwrap();
        let text = s.to_json();
        let again = parse_deployment_file(&text, &cat).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_json(), text);
        assert!(text.contains("\"du-low\""));
    }
}
