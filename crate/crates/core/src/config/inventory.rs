use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ConfigError;

pub const SEED_RU_INVENTORY: &str = include_str!("../../assets/ru_inventory.json");

/// One physical (or emulated) radio unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuUnit {
    pub location: i64,
    pub mac: String,
}

/// Static RU name → units map; MACs are declared, not discovered.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuInventory {
    units: BTreeMap<String, Vec<RuUnit>>,
}

impl RuInventory {
    pub fn seeded() -> Self {
        Self::from_json(SEED_RU_INVENTORY).expect("bundled RU inventory is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let inv: RuInventory = serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        for (name, units) in &inv.units {
            for (i, u) in units.iter().enumerate() {
                if !is_mac(&u.mac) {
                    return Err(ConfigError::Schema { path: format!("{name}[{i}].mac"), message: format!("`{}` is not a MAC address", u.mac) });
                }
            }
        }
        Ok(inv)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("inventory serializes")
    }

    pub fn insert(&mut self, name: &str, unit: RuUnit) {
        self.units.entry(name.to_owned()).or_default().push(unit);
    }

    /// Resolves a MAC. Without a location the unit with the lowest location
    /// is used.
    pub fn mac_for(&self, name: &str, location: Option<i64>) -> Option<&str> {
        let units = self.units.get(name)?;
        match location {
            Some(loc) => units.iter().find(|u| u.location == loc).map(|u| u.mac.as_str()),
            None => units.iter().min_by_key(|u| u.location).map(|u| u.mac.as_str()),
        }
    }
}

fn is_mac(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    parts.len() == 6 && parts.iter().all(|p| p.len() == 2 && p.bytes().all(|b| b.is_ascii_hexdigit()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_inventory_resolves_reference_ru() {
        let inv = RuInventory::seeded();
        assert!(inv.mac_for("foxconn", Some(660)).is_some());
        assert!(inv.mac_for("foxconn", Some(1)).is_none());
        assert!(inv.mac_for("ghost", None).is_none());
        let lowest = inv.mac_for("foxconn", Some(640));
        assert_eq!(inv.mac_for("foxconn", None), lowest);
    }

    #[test]
    fn rejects_bad_mac() {
        let bad = r#"{"foxconn": [{"location": 660, "mac": "zz:00"}]}"#;
        assert!(RuInventory::from_json(bad).is_err());
    }
}
