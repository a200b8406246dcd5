//! Strict JSON object walking with path-qualified errors.

use std::collections::BTreeSet;

use serde_json::{Map, Value};

use super::ConfigError;

pub(crate) fn parse_text(text: &str) -> Result<Value, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
}

pub(crate) fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ConfigError> {
    v.as_object().ok_or_else(|| ConfigError::Type { path: path.to_owned(), expected: "object" })
}

/// Reads keys out of one JSON object and rejects anything left unread.
pub(crate) struct Fields<'a> {
    path: String,
    map: &'a Map<String, Value>,
    seen: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    pub(crate) fn new(v: &'a Value, path: &str) -> Result<Self, ConfigError> {
        Ok(Self { path: path.to_owned(), map: as_object(v, path)?, seen: BTreeSet::new() })
    }

    pub(crate) fn child(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_owned()
        } else {
            format!("{}.{}", self.path, key)
        }
    }

    pub(crate) fn opt(&mut self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.map.get_key_value(key)?;
        self.seen.insert(k.as_str());
        Some(v)
    }

    pub(crate) fn req(&mut self, key: &str) -> Result<&'a Value, ConfigError> {
        self.opt(key).ok_or_else(|| ConfigError::Schema { path: self.child(key), message: "missing required key".into() })
    }

    pub(crate) fn req_str(&mut self, key: &str) -> Result<String, ConfigError> {
        let v = self.req(key)?;
        v.as_str().map(str::to_owned).ok_or_else(|| self.type_err(key, "string"))
    }

    /// Absent and explicit `null` both read as `None`.
    pub(crate) fn opt_str(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.opt(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(self.type_err(key, "string or null")),
        }
    }

    pub(crate) fn req_int(&mut self, key: &str) -> Result<i64, ConfigError> {
        let v = self.req(key)?;
        v.as_i64().ok_or_else(|| self.type_err(key, "integer"))
    }

    pub(crate) fn opt_int(&mut self, key: &str) -> Result<Option<i64>, ConfigError> {
        match self.opt(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => v.as_i64().map(Some).ok_or_else(|| self.type_err(key, "integer or null")),
        }
    }

    pub(crate) fn req_number(&mut self, key: &str) -> Result<f64, ConfigError> {
        let v = self.req(key)?;
        v.as_f64().ok_or_else(|| self.type_err(key, "number"))
    }

    pub(crate) fn opt_bool(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.opt(key) {
            None => Ok(None),
            Some(v) => v.as_bool().map(Some).ok_or_else(|| self.type_err(key, "boolean")),
        }
    }

    pub(crate) fn type_err(&self, key: &str, expected: &'static str) -> ConfigError {
        ConfigError::Type { path: self.child(key), expected }
    }

    /// Errors on the first key that was never read.
    pub(crate) fn finish(self) -> Result<(), ConfigError> {
        match self.map.keys().find(|k| !self.seen.contains(k.as_str())) {
            Some(k) => Err(ConfigError::Schema { path: self.child(k), message: "unknown key".into() }),
            None => Ok(()),
        }
    }
}
