use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;
use serde_json::{json, Value};

use super::json::Fields;
use super::{to_pretty, ConfigError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UeRecord {
    pub serial_number: String,
    pub ue_hostname: String,
    pub ue_imsi: String,
    pub ue_ip_address: Ipv4Addr,
    /// "room/position".
    pub ue_location: String,
    pub ue_model: String,
}

impl UeRecord {
    pub fn room(&self) -> &str {
        self.ue_location.split('/').next().unwrap_or("")
    }

    fn to_value(&self) -> Value {
        json!({
            "ue_hostname": self.ue_hostname,
            "ue_imsi": self.ue_imsi,
            "ue_ip_address": self.ue_ip_address.to_string(),
            "ue_location": self.ue_location,
            "ue_model": self.ue_model,
            "ue_serial_number": self.serial_number,
        })
    }
}

/// UE records keyed by serial number.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UeDatabase {
    records: BTreeMap<String, UeRecord>,
}

impl UeDatabase {
    pub fn get(&self, serial: &str) -> Option<&UeRecord> {
        self.records.get(serial)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UeRecord> {
        self.records.values()
    }

    pub fn insert(&mut self, record: UeRecord) -> Result<(), ConfigError> {
        validate_imsi(&record.serial_number, &record.ue_imsi)?;
        if self.records.contains_key(&record.serial_number) {
            return Err(ConfigError::DuplicateSerial(record.serial_number));
        }
        self.records.insert(record.serial_number.clone(), record);
        Ok(())
    }

    /// UEs whose location room matches `room`, in serial order.
    pub fn in_room(&self, room: &str) -> Vec<&UeRecord> {
        self.records.values().filter(|r| r.room() == room).collect()
    }

    pub fn to_json(&self) -> String {
        let map: serde_json::Map<String, Value> = self.records.iter().map(|(k, r)| (k.clone(), r.to_value())).collect();
        to_pretty(&Value::Object(map))
    }
}

fn validate_imsi(serial: &str, imsi: &str) -> Result<(), ConfigError> {
    if imsi.len() == 15 && imsi.bytes().all(|b| b.is_ascii_digit()) {
        Ok(())
    } else {
        Err(ConfigError::BadImsi { serial: serial.to_owned(), imsi: imsi.to_owned() })
    }
}

/// Top-level object read as an ordered entry list so repeated keys survive
/// long enough to be reported.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object of UE records")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, Value>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V)
    }
}

pub fn parse_ue_database(text: &str) -> Result<UeDatabase, ConfigError> {
    let entries: Entries = serde_json::from_str(text).map_err(|e| {
        if e.is_data() {
            ConfigError::Type { path: String::new(), expected: "object" }
        } else {
            ConfigError::Syntax(e.to_string())
        }
    })?;
    let mut db = UeDatabase::default();
    for (serial, value) in entries.0 {
        let mut f = Fields::new(&value, &serial)?;
        let ue_hostname = f.req_str("ue_hostname")?;
        let ue_imsi = f.req_str("ue_imsi")?;
        let ip = f.req_str("ue_ip_address")?;
        let ue_location = f.req_str("ue_location")?;
        let ue_model = f.req_str("ue_model")?;
        let inner_serial = f.req_str("ue_serial_number")?;
        let path = f.child("ue_serial_number");
        let ip_path = f.child("ue_ip_address");
        f.finish()?;
        if inner_serial != serial {
            return Err(ConfigError::Schema { path, message: format!("does not match record key `{serial}`") });
        }
        let ue_ip_address = ip
            .parse::<Ipv4Addr>()
            .map_err(|_| ConfigError::Schema { path: ip_path, message: format!("`{ip}` is not an IPv4 address") })?;
        db.insert(UeRecord { serial_number: serial, ue_hostname, ue_imsi, ue_ip_address, ue_location, ue_model })?;
    }
    Ok(db)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = include_str!("../../tests/fixtures/ue_database.json");

    #[test]
    fn parses_reference_listing() {
        let db = parse_ue_database(LISTING).unwrap();
        assert_eq!(db.len(), 3);
        assert_eq!(db.get("mj06k2su").unwrap().ue_imsi, "001010000012252");
        assert_eq!(db.in_room("660").len(), 2);
    }

    #[test]
    fn empty_map_is_empty_database() {
        assert!(parse_ue_database("{}").unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_imsi_and_duplicates() {
        let short = LISTING.replace("001010000012252", "00101000001225");
        assert!(matches!(parse_ue_database(&short), Err(ConfigError::BadImsi { .. })));
        let letters = LISTING.replace("001010000012252", "00101000001225x");
        assert!(matches!(parse_ue_database(&letters), Err(ConfigError::BadImsi { .. })));
        let dup = r#"{
            "a": {"ue_hostname": "h", "ue_imsi": "001010000000001", "ue_ip_address": "10.0.0.1", "ue_location": "1/1", "ue_model": "m", "ue_serial_number": "a"},
            "a": {"ue_hostname": "h", "ue_imsi": "001010000000002", "ue_ip_address": "10.0.0.2", "ue_location": "1/2", "ue_model": "m", "ue_serial_number": "a"}
        }"#;
        assert_eq!(parse_ue_database(dup), Err(ConfigError::DuplicateSerial("a".into())));
    }

    #[test]
    fn rejects_schema_violations() {
        let extra = LISTING.replace("\"ue_model\": \"10MUS30601\",", "\"ue_model\": \"10MUS30601\", \"x\": 1,");
        assert!(matches!(parse_ue_database(&extra), Err(ConfigError::Schema { .. })));
        let mismatch = LISTING.replace("\"ue_serial_number\": \"mj06k2su\"", "\"ue_serial_number\": \"other\"");
        assert!(matches!(parse_ue_database(&mismatch), Err(ConfigError::Schema { .. })));
        let ip = LISTING.replace("10.112.1.52", "10.112.1");
        assert!(matches!(parse_ue_database(&ip), Err(ConfigError::Schema { .. })));
        assert!(matches!(parse_ue_database("[]"), Err(ConfigError::Type { .. })));
    }

    #[test]
    fn round_trip_is_byte_stable() {
        let db = parse_ue_database(LISTING).unwrap();
        let text = db.to_json();
        let again = parse_ue_database(&text).unwrap();
        assert_eq!(again, db);
        assert_eq!(again.to_json(), text);
    }
}
