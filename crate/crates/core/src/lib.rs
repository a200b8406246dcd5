//! Intent-driven Open RAN orchestration over a simulated heterogeneous cluster.
//!
//! The crate is layered bottom-up:
//!
//! - [`catalog`] holds RAN components and the compatibility graph every
//!   configuration is validated against.
//! - [`config`] parses and serializes deployment files, test files and the UE
//!   database, and specializes abstract deployments onto concrete nodes.
//! - [`cluster`] is a deterministic discrete-event model of the compute
//!   cluster (machine-config pools, profiles, SR-IOV pools, PTP health).
//! - [`scheduler`] places workloads inside pool boundaries and drives
//!   eviction and redeployment.
//! - [`pipeline`] runs deployment and test pipelines with a calibrated
//!   timing model, an image registry and a reconcile loop.
//! - [`telemetry`] synthesizes performance series and stores results for
//!   regression comparison.
//! - [`agent`] turns natural-language intents into validated configurations
//!   through a tool-calling loop.

pub mod agent;
pub mod catalog;
pub mod cluster;
pub mod config;
pub mod pipeline;
pub mod scheduler;
pub mod telemetry;
pub mod time;

pub(crate) mod rng;

pub use catalog::{Catalog, Role};
pub use time::SimTime;
