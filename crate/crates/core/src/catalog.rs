//! Component catalog and compatibility graph.
//!
//! Every configuration the engine executes is first checked against the
//! graph here: a scenario is valid iff every pair of filled roles is an edge.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed catalog shipped with the crate.
pub const SEED_CATALOG: &str = include_str!("../assets/catalog.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CatalogError {
    #[error("component id `{0}` is already registered")]
    DuplicateId(String),
    #[error("a {role} component named `{name}` is already registered")]
    DuplicateName { role: Role, name: String },
    #[error("peer `{0}` is not registered")]
    UnknownPeer(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("no {role} component named `{name}`")]
    UnknownName { role: Role, name: String },
    #[error("invalid catalog seed: {0}")]
    Seed(String),
}

/// The five slots of a disaggregated gNB deployment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Core,
    Cu,
    DuHigh,
    DuLow,
    Ru,
}

impl Role {
    pub const ALL: [Role; 5] = [Role::Core, Role::Cu, Role::DuHigh, Role::DuLow, Role::Ru];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Core => "core",
            Role::Cu => "cu",
            Role::DuHigh => "du_high",
            Role::DuLow => "du_low",
            Role::Ru => "ru",
        }
    }

    /// Key used for this role in deployment files.
    pub fn file_key(self) -> &'static str {
        match self {
            Role::Core => "core_network",
            Role::Cu => "cu",
            Role::DuHigh => "du-high",
            Role::DuLow => "du-low",
            Role::Ru => "ru",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        match s {
            "core" | "core_network" => Some(Role::Core),
            "cu" => Some(Role::Cu),
            "du_high" | "du-high" => Some(Role::DuHigh),
            "du_low" | "du-low" => Some(Role::DuLow),
            "ru" => Some(Role::Ru),
            _ => None,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fronthaul family of a radio unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fronthaul {
    /// O-RAN 7.2 split: low-PHY in the RU, PTP-synchronized fronthaul.
    Split72,
    /// SDR radio fed raw I/Q (8.1-like split).
    Sdr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDescriptor {
    pub id: String,
    pub role: Role,
    pub name: String,
    #[serde(default)]
    pub requires_accelerator: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fronthaul: Option<Fronthaul>,
}

impl ComponentDescriptor {
    pub fn new(id: impl Into<String>, role: Role, name: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            role,
            name: name.into(),
            requires_accelerator: false,
            config_template: None,
            fronthaul: None,
        }
    }

    pub fn with_accelerator(mut self) -> Self {
        self.requires_accelerator = true;
        self
    }

    pub fn with_fronthaul(mut self, fh: Fronthaul) -> Self {
        self.fronthaul = Some(fh);
        self
    }
}

/// Undirected compatibility edges over component ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CompatibilityGraph {
    edges: BTreeSet<(String, String)>,
}

impl CompatibilityGraph {
    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_owned(), b.to_owned())
        } else {
            (b.to_owned(), a.to_owned())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str) {
        self.edges.insert(Self::key(a, b));
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        a == b || self.edges.contains(&Self::key(a, b))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// A (possibly partial) assignment of component names to roles.
pub type Selection = BTreeMap<Role, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationStatus {
    Valid,
    MissingValues,
    Incompatible,
}

/// One incompatible pair among the filled roles, reported by component id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Conflict {
    pub left_role: Role,
    pub right_role: Role,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub status: ValidationStatus,
    pub missing_roles: Vec<Role>,
    pub conflicts: Vec<Conflict>,
    pub message: String,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.status == ValidationStatus::Valid
    }

    /// Builds a report from its lists; status and message are derived so the
    /// status/list invariant cannot drift.
    pub fn from_parts(missing_roles: Vec<Role>, conflicts: Vec<Conflict>, names: &dyn Fn(&str) -> String) -> Self {
        let status = if !conflicts.is_empty() {
            ValidationStatus::Incompatible
        } else if !missing_roles.is_empty() {
            ValidationStatus::MissingValues
        } else {
            ValidationStatus::Valid
        };
        let mut parts = Vec::new();
        if !missing_roles.is_empty() {
            let roles: Vec<&str> = missing_roles.iter().map(|r| r.as_str()).collect();
            parts.push(format!("missing values for: {}", roles.join(", ")));
        }
        for c in &conflicts {
            parts.push(format!(
                "{}={} is incompatible with {}={}",
                c.left_role,
                names(&c.left),
                c.right_role,
                names(&c.right)
            ));
        }
        let message = if parts.is_empty() {
            "configuration is valid".to_owned()
        } else {
            parts.join("; ")
        };
        Self { status, missing_roles, conflicts, message }
    }
}

/// Declares one test parameter and its legal literals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSpec {
    #[serde(rename = "type")]
    pub kind: ParameterKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    /// Exclusive lower bound (`value > min_exclusive`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_exclusive: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterKind {
    Integer,
    Number,
    Boolean,
    String,
    Enum,
}

impl ParameterSpec {
    /// Checks a literal against type and range; returns the rejection text.
    pub fn check(&self, value: &serde_json::Value) -> Result<(), String> {
        use serde_json::Value;
        match self.kind {
            ParameterKind::Boolean => {
                if !value.is_boolean() {
                    return Err("expected a boolean".into());
                }
            }
            ParameterKind::String => {
                if !value.is_string() {
                    return Err("expected a string".into());
                }
            }
            ParameterKind::Enum => match value {
                Value::String(s) if self.values.iter().any(|v| v == s) => {}
                _ => return Err(format!("expected one of [{}]", self.values.join(", "))),
            },
            ParameterKind::Integer | ParameterKind::Number => {
                let n = match value {
                    Value::Number(n) if self.kind == ParameterKind::Number => n.as_f64(),
                    Value::Number(n) => n.as_i64().map(|i| i as f64).or_else(|| n.as_u64().map(|u| u as f64)),
                    _ => None,
                };
                let Some(n) = n else {
                    return Err(format!("expected {}", if self.kind == ParameterKind::Integer { "an integer" } else { "a number" }));
                };
                if let Some(lo) = self.min_exclusive {
                    if n <= lo {
                        return Err(format!("must be > {lo}"));
                    }
                }
                if let Some(lo) = self.min {
                    if n < lo {
                        return Err(format!("must be >= {lo}"));
                    }
                }
                if let Some(hi) = self.max {
                    if n > hi {
                        return Err(format!("must be <= {hi}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Human-readable description of the legal domain, used in feedback.
    pub fn describe(&self) -> String {
        match self.kind {
            ParameterKind::Enum => format!("one of [{}]", self.values.join(", ")),
            ParameterKind::Boolean => "true or false".into(),
            ParameterKind::String => "a string".into(),
            ParameterKind::Integer | ParameterKind::Number => {
                let mut s = if self.kind == ParameterKind::Integer { "integer".to_owned() } else { "number".to_owned() };
                if let Some(lo) = self.min_exclusive {
                    s.push_str(&format!(" > {lo}"));
                }
                if let Some(lo) = self.min {
                    s.push_str(&format!(" >= {lo}"));
                }
                if let Some(hi) = self.max {
                    s.push_str(&format!(" <= {hi}"));
                }
                s
            }
        }
    }
}

/// Per-generator legal parameter sets for test files.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestParameterGraph {
    /// Generator name → parameters legal under it.
    pub generators: BTreeMap<String, BTreeSet<String>>,
    /// Parameters every UE specification must carry, whatever the generator.
    pub required: BTreeSet<String>,
    pub parameters: BTreeMap<String, ParameterSpec>,
}

impl TestParameterGraph {
    pub fn allows(&self, generator: &str, param: &str) -> bool {
        self.generators.get(generator).is_some_and(|ps| ps.contains(param))
    }

    /// Generators that accept every parameter in `params`.
    pub fn generators_accepting<'a>(&'a self, params: impl IntoIterator<Item = &'a str> + Clone) -> Vec<&'a str> {
        self.generators
            .iter()
            .filter(|(_, ps)| params.clone().into_iter().all(|p| ps.contains(p)))
            .map(|(g, _)| g.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedFile {
    components: Vec<ComponentDescriptor>,
    edges: Vec<(String, String)>,
    #[serde(default)]
    test_parameters: TestParameterGraph,
}

/// Component registry plus compatibility graph.
///
/// Read-mostly: share it behind `Arc<RwLock<Catalog>>` when registration can
/// race with readers.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    components: BTreeMap<String, ComponentDescriptor>,
    by_name: BTreeMap<(Role, String), String>,
    graph: CompatibilityGraph,
    test_params: TestParameterGraph,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// The seed catalog: the validated stack/RU pairs plus Open5GS as core.
    pub fn seeded() -> Self {
        Self::from_json(SEED_CATALOG).expect("bundled catalog seed is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let seed: SeedFile = serde_json::from_str(text).map_err(|e| CatalogError::Seed(e.to_string()))?;
        let mut cat = Catalog { test_params: seed.test_parameters, ..Default::default() };
        for c in seed.components {
            cat.register_component(c, &[])?;
        }
        for (a, b) in seed.edges {
            for id in [&a, &b] {
                if !cat.components.contains_key(id) {
                    return Err(CatalogError::UnknownPeer(id.clone()));
                }
            }
            cat.graph.insert(&a, &b);
        }
        Ok(cat)
    }

    /// Serializes with components and edges sorted by id.
    pub fn to_json(&self) -> String {
        let seed = SeedFile {
            components: self.components.values().cloned().collect(),
            edges: self.graph.edges().map(|(a, b)| (a.to_owned(), b.to_owned())).collect(),
            test_parameters: self.test_params.clone(),
        };
        serde_json::to_string_pretty(&seed).expect("catalog serializes")
    }

    pub fn register_component(&mut self, descriptor: ComponentDescriptor, compatible_with: &[&str]) -> Result<String, CatalogError> {
        if self.components.contains_key(&descriptor.id) {
            return Err(CatalogError::DuplicateId(descriptor.id));
        }
        let name_key = (descriptor.role, descriptor.name.clone());
        if self.by_name.contains_key(&name_key) {
            return Err(CatalogError::DuplicateName { role: descriptor.role, name: descriptor.name });
        }
        if let Some(missing) = compatible_with.iter().find(|p| !self.components.contains_key(**p)) {
            return Err(CatalogError::UnknownPeer((*missing).to_owned()));
        }
        let id = descriptor.id.clone();
        for peer in compatible_with {
            self.graph.insert(&id, peer);
        }
        self.by_name.insert(name_key, id.clone());
        self.components.insert(id.clone(), descriptor);
        Ok(id)
    }

    pub fn compatible(&self, a: &str, b: &str) -> Result<bool, CatalogError> {
        for id in [a, b] {
            if !self.components.contains_key(id) {
                return Err(CatalogError::UnknownComponent(id.to_owned()));
            }
        }
        Ok(self.graph.contains(a, b))
    }

    pub fn get(&self, id: &str) -> Option<&ComponentDescriptor> {
        self.components.get(id)
    }

    pub fn lookup(&self, role: Role, name: &str) -> Option<&ComponentDescriptor> {
        self.by_name.get(&(role, name.to_owned())).and_then(|id| self.components.get(id))
    }

    pub fn resolve(&self, role: Role, name: &str) -> Result<&ComponentDescriptor, CatalogError> {
        self.lookup(role, name).ok_or_else(|| CatalogError::UnknownName { role, name: name.to_owned() })
    }

    pub fn components(&self) -> impl Iterator<Item = &ComponentDescriptor> {
        self.components.values()
    }

    pub fn components_of(&self, role: Role) -> impl Iterator<Item = &ComponentDescriptor> {
        self.components.values().filter(move |c| c.role == role)
    }

    pub fn graph(&self) -> &CompatibilityGraph {
        &self.graph
    }

    pub fn test_parameters(&self) -> &TestParameterGraph {
        &self.test_params
    }

    /// Checks a (possibly partial) selection: lists unfilled roles and every
    /// incompatible pair among the filled ones.
    pub fn validate(&self, selection: &Selection) -> Result<ValidationReport, CatalogError> {
        let mut filled = Vec::new();
        for (role, name) in selection {
            filled.push((*role, self.resolve(*role, name)?.id.as_str()));
        }
        let missing: Vec<Role> = Role::ALL.into_iter().filter(|r| !selection.contains_key(r)).collect();
        let mut conflicts = Vec::new();
        for (i, (ra, a)) in filled.iter().enumerate() {
            for (rb, b) in &filled[i + 1..] {
                if !self.graph.contains(a, b) {
                    conflicts.push(Conflict { left_role: *ra, right_role: *rb, left: (*a).to_owned(), right: (*b).to_owned() });
                }
            }
        }
        Ok(ValidationReport::from_parts(missing, conflicts, &|id| self.display_name(id)))
    }

    /// Names of `role` components compatible with every other filled role in
    /// `partial`. A filled value for `role` itself is ignored, so the result
    /// also answers "what could replace it". Unknown names in `partial` match
    /// nothing.
    pub fn allowed_values(&self, role: Role, partial: &Selection) -> BTreeSet<String> {
        let constraints: Vec<Option<&str>> = partial
            .iter()
            .filter(|(r, _)| **r != role)
            .map(|(r, n)| self.lookup(*r, n).map(|c| c.id.as_str()))
            .collect();
        self.components_of(role)
            .filter(|cand| constraints.iter().all(|c| c.is_some_and(|id| self.graph.contains(&cand.id, id))))
            .map(|cand| cand.name.clone())
            .collect()
    }

    /// True if the unfilled roles of `partial` can be filled so that the
    /// whole selection validates.
    pub fn has_completion(&self, partial: &Selection) -> bool {
        let mut sel = partial.clone();
        self.complete_from(&mut sel, 0)
    }

    fn complete_from(&self, sel: &mut Selection, from: usize) -> bool {
        let Some(role) = Role::ALL[from.min(5)..].iter().copied().find(|r| !sel.contains_key(r)) else {
            return self.validate(sel).is_ok_and(|r| r.is_valid());
        };
        for name in self.allowed_values(role, sel) {
            sel.insert(role, name);
            let ok = self.complete_from(sel, from + 1);
            sel.remove(&role);
            if ok {
                return true;
            }
        }
        false
    }

    /// The subset of [`Self::allowed_values`] that still leaves a valid
    /// completion for every other role.
    pub fn completable_values(&self, role: Role, partial: &Selection) -> BTreeSet<String> {
        let mut sel = partial.clone();
        sel.remove(&role);
        self.allowed_values(role, &sel)
            .into_iter()
            .filter(|name| {
                sel.insert(role, name.clone());
                let ok = self.has_completion(&sel);
                sel.remove(&role);
                ok
            })
            .collect()
    }

    fn display_name(&self, id: &str) -> String {
        self.components.get(id).map(|c| c.name.clone()).unwrap_or_else(|| id.to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(pairs: &[(Role, &str)]) -> Selection {
        pairs.iter().map(|(r, n)| (*r, (*n).to_owned())).collect()
    }

    /// Independent oracle: a selection is valid iff all five roles are filled
    /// and every unordered pair of chosen ids is an edge in the raw seed.
    fn brute_force_valid(seed: &serde_json::Value, chosen: &[&str]) -> bool {
        let edges: BTreeSet<(String, String)> = seed["edges"]
            .as_array()
            .unwrap()
            .iter()
            .map(|e| (e[0].as_str().unwrap().to_owned(), e[1].as_str().unwrap().to_owned()))
            .collect();
        let has = |a: &str, b: &str| edges.contains(&(a.to_owned(), b.to_owned())) || edges.contains(&(b.to_owned(), a.to_owned()));
        chosen.len() == 5 && (0..5).all(|i| (i + 1..5).all(|j| has(chosen[i], chosen[j])))
    }

    #[test]
    fn seed_has_table_pairs() {
        let cat = Catalog::seeded();
        assert!(cat.compatible("oai-du-high", "cubb-du-low").unwrap());
        assert!(!cat.compatible("srsran-du-high", "cubb-du-low").unwrap());
        assert!(!cat.compatible("srsran-du-high", "foxconn-ru").unwrap());
        assert!(cat.compatible("srsran-du-high", "usrp_x310-ru").unwrap());
        assert!(cat.compatible("cubb-du-low", "cubb-du-low").unwrap());
        assert_eq!(cat.compatible("nope", "cubb-du-low"), Err(CatalogError::UnknownComponent("nope".into())));
    }

    #[test]
    fn register_adds_symmetric_edges() {
        let mut cat = Catalog::new();
        cat.register_component(ComponentDescriptor::new("oai-du-high", Role::DuHigh, "oai"), &[]).unwrap();
        let id = cat
            .register_component(ComponentDescriptor::new("cubb", Role::DuLow, "cubb").with_accelerator(), &["oai-du-high"])
            .unwrap();
        assert_eq!(id, "cubb");
        assert!(cat.compatible("cubb", "oai-du-high").unwrap());
        assert!(cat.compatible("oai-du-high", "cubb").unwrap());
        assert_eq!(
            cat.register_component(ComponentDescriptor::new("cubb", Role::DuLow, "other"), &[]),
            Err(CatalogError::DuplicateId("cubb".into()))
        );
        assert_eq!(
            cat.register_component(ComponentDescriptor::new("x", Role::Ru, "x"), &["ghost"]),
            Err(CatalogError::UnknownPeer("ghost".into()))
        );
    }

    #[test]
    fn isolated_vertex_never_validates() {
        let mut cat = Catalog::seeded();
        cat.register_component(ComponentDescriptor::new("lonely-ru", Role::Ru, "lonely"), &[]).unwrap();
        let s = sel(&[(Role::Core, "open5gs"), (Role::Cu, "oai"), (Role::DuHigh, "oai"), (Role::DuLow, "none"), (Role::Ru, "lonely")]);
        let r = cat.validate(&s).unwrap();
        assert_eq!(r.status, ValidationStatus::Incompatible);
        assert_eq!(r.conflicts.len(), 4);
    }

    #[test]
    fn validate_reference_scenarios() {
        let cat = Catalog::seeded();
        let listing = sel(&[(Role::Core, "open5gs"), (Role::Cu, "oai"), (Role::DuHigh, "oai"), (Role::DuLow, "cubb"), (Role::Ru, "foxconn")]);
        let r = cat.validate(&listing).unwrap();
        assert!(r.is_valid());
        assert_eq!(r.message, "configuration is valid");

        let r = cat.validate(&Selection::new()).unwrap();
        assert_eq!(r.status, ValidationStatus::MissingValues);
        assert_eq!(r.missing_roles, Role::ALL.to_vec());

        let bad = sel(&[(Role::Cu, "srsran"), (Role::DuHigh, "srsran"), (Role::DuLow, "cubb")]);
        let r = cat.validate(&bad).unwrap();
        assert_eq!(r.status, ValidationStatus::Incompatible);
        assert!(r.conflicts.contains(&Conflict {
            left_role: Role::DuHigh,
            right_role: Role::DuLow,
            left: "srsran-du-high".into(),
            right: "cubb-du-low".into(),
        }));
        assert!(r.message.contains("du_high=srsran is incompatible with du_low=cubb"));

        let unknown = sel(&[(Role::Cu, "xyz")]);
        assert!(matches!(cat.validate(&unknown), Err(CatalogError::UnknownName { .. })));
    }

    #[test]
    fn allowed_values_examples() {
        let cat = Catalog::seeded();
        let du_low = cat.allowed_values(Role::DuLow, &sel(&[(Role::DuHigh, "oai")]));
        assert_eq!(du_low, ["cubb", "none"].iter().map(|s| s.to_string()).collect());
        let all_rus: BTreeSet<String> = cat.components_of(Role::Ru).map(|c| c.name.clone()).collect();
        assert_eq!(cat.allowed_values(Role::Ru, &Selection::new()), all_rus);
        let rus = cat.allowed_values(Role::Ru, &sel(&[(Role::DuHigh, "srsran")]));
        assert_eq!(rus, ["usrp_x310", "usrp_x410"].iter().map(|s| s.to_string()).collect());
        // cross-check against exhaustive validation over every RU
        for ru in cat.components_of(Role::Ru) {
            let s = sel(&[(Role::DuHigh, "srsran"), (Role::Ru, &ru.name)]);
            assert_eq!(cat.validate(&s).unwrap().conflicts.is_empty(), rus.contains(&ru.name));
        }
    }

    #[test]
    fn completable_values_drop_dead_ends() {
        let mut cat = Catalog::new();
        cat.register_component(ComponentDescriptor::new("core", Role::Core, "core"), &[]).unwrap();
        cat.register_component(ComponentDescriptor::new("cu", Role::Cu, "cu"), &["core"]).unwrap();
        cat.register_component(ComponentDescriptor::new("dh", Role::DuHigh, "dh"), &["core", "cu"]).unwrap();
        cat.register_component(ComponentDescriptor::new("dl", Role::DuLow, "dl"), &["core", "cu", "dh"]).unwrap();
        cat.register_component(ComponentDescriptor::new("ru-a", Role::Ru, "a"), &["core", "cu", "dh", "dl"]).unwrap();
        // pairwise fine with the core, but nothing else takes it
        cat.register_component(ComponentDescriptor::new("ru-b", Role::Ru, "b"), &["core"]).unwrap();
        let partial = sel(&[(Role::Core, "core")]);
        assert_eq!(cat.allowed_values(Role::Ru, &partial).len(), 2);
        assert_eq!(cat.completable_values(Role::Ru, &partial), ["a".to_owned()].into());
        assert!(!cat.has_completion(&sel(&[(Role::Ru, "b")])));
        assert!(cat.has_completion(&Selection::new()));
    }

    #[test]
    fn exhaustive_oracle_equivalence() {
        let cat = Catalog::seeded();
        let raw: serde_json::Value = serde_json::from_str(SEED_CATALOG).unwrap();
        let per_role: Vec<Vec<Option<(String, String)>>> = Role::ALL
            .iter()
            .map(|r| {
                let mut v: Vec<Option<(String, String)>> = vec![None];
                v.extend(cat.components_of(*r).map(|c| Some((c.name.clone(), c.id.clone()))));
                v
            })
            .collect();
        let mut count = 0;
        let mut idx = [0usize; 5];
        loop {
            let mut s = Selection::new();
            let mut ids = Vec::new();
            for (k, role) in Role::ALL.iter().enumerate() {
                if let Some((name, id)) = &per_role[k][idx[k]] {
                    s.insert(*role, name.clone());
                    ids.push(id.as_str());
                }
            }
            let report = cat.validate(&s).unwrap();
            assert_eq!(report.is_valid(), brute_force_valid(&raw, &ids), "{s:?}");
            count += 1;
            let mut k = 0;
            loop {
                idx[k] += 1;
                if idx[k] < per_role[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
                if k == 5 {
                    assert!(count > 100);
                    return;
                }
            }
        }
    }

    #[test]
    fn seed_round_trips_sorted() {
        let cat = Catalog::seeded();
        let text = cat.to_json();
        let again = Catalog::from_json(&text).unwrap();
        assert_eq!(again.to_json(), text);
        assert_eq!(again.graph(), cat.graph());
    }
}
