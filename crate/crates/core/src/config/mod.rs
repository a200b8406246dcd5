//! Configuration artifacts: deployment files, test files, the UE database and
//! the RU inventory, plus specialization onto concrete infrastructure.
//!
//! Parsers are strict: unknown keys are errors, and every error carries the
//! dotted path of the offending field. Serializers emit sorted keys so output
//! is byte-stable.

mod deployment;
mod inventory;
mod json;
mod resolve;
mod test_spec;
mod ue_db;

use thiserror::Error;

use crate::catalog::{CatalogError, ValidationReport};

pub use deployment::{parse_deployment_file, ComponentRef, CoreRef, NetworkScenario, RuRef};
pub use inventory::{RuInventory, RuUnit};
pub use resolve::{
    classify_stack, specialize_deployment, PlacementPolicy, PodLayout, PodLayoutKind, ResolveError, ResolvedDeployment,
    StackKind, StackPlacement,
};
pub use test_spec::{parse_test_file, parse_test_file_with, Distribution, Protocol, TestSpec, TestType, UeSpec};
pub use ue_db::{parse_ue_database, UeDatabase, UeRecord};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed JSON: {0}")]
    Syntax(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("type error at `{path}`: expected {expected}")]
    Type { path: String, expected: &'static str },
    #[error("range error at `{path}`: {message}")]
    Range { path: String, message: String },
    #[error("parameter `{path}` is not valid for test type `{generator}`")]
    ParamMismatch { path: String, generator: String },
    #[error("catalog error at `{path}`: {source}")]
    Catalog { path: String, source: CatalogError },
    #[error("incompatible components: {}", .0.message)]
    Incompatible(ValidationReport),
    #[error("duplicate UE serial `{0}`")]
    DuplicateSerial(String),
    #[error("UE `{serial}` has invalid IMSI `{imsi}` (need 15 decimal digits)")]
    BadImsi { serial: String, imsi: String },
}

impl ConfigError {
    /// Dotted path of the offending field, when the error has one.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Schema { path, .. }
            | ConfigError::Type { path, .. }
            | ConfigError::Range { path, .. }
            | ConfigError::ParamMismatch { path, .. }
            | ConfigError::Catalog { path, .. } => Some(path),
            _ => None,
        }
    }
}

pub(crate) fn to_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("JSON values serialize")
}
