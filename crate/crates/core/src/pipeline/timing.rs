use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::registry::ChainImage;
use crate::config::StackKind;
use crate::time::SimTime;

pub const SEED_TIMING: &str = include_str!("../../assets/timing.json");

/// A chain of images built for every listed pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub pools: Vec<String>,
    pub images: Vec<ChainImage>,
}

/// Per-task base durations (seconds), link model and image layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    /// Uniform jitter fraction applied to every task duration.
    pub jitter: f64,
    pub link_gbps: f64,
    pub layer_overhead_s: f64,
    pub warm_pull_ms: u64,
    /// Pull every pool image onto every node of the pool at startup.
    pub prepull: bool,
    pub start_timeout_s: f64,
    pub build_base_s: f64,
    pub build_s_per_gb: f64,
    pub tasks: BTreeMap<String, f64>,
    pub gnb_setup: BTreeMap<StackKind, f64>,
    /// Images ("name:tag") a stack's pod pulls.
    pub stack_images: BTreeMap<StackKind, Vec<String>>,
    pub image_chains: Vec<ChainSpec>,
}

impl Default for TimingModel {
    fn default() -> Self {
        Self::from_json(SEED_TIMING).expect("bundled timing model is valid")
    }
}

impl TimingModel {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let m: TimingModel = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if !(0.0..1.0).contains(&m.jitter) {
            return Err(format!("jitter must be in [0, 1), got {}", m.jitter));
        }
        if !(m.link_gbps > 0.0) {
            return Err("link_gbps must be > 0".into());
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("timing model serializes")
    }

    pub fn without_jitter(mut self) -> Self {
        self.jitter = 0.0;
        self
    }

    /// Base duration of a named task, zero when unconfigured.
    pub fn base(&self, task: &str) -> f64 {
        self.tasks.get(task).copied().unwrap_or(0.0)
    }

    pub fn gnb_setup_base(&self, stack: StackKind) -> f64 {
        self.gnb_setup.get(&stack).copied().unwrap_or(0.0)
    }

    /// `base` scaled by a uniform factor in [1 - jitter, 1 + jitter].
    pub fn jittered<R: Rng>(&self, base: f64, rng: &mut R) -> SimTime {
        let factor = if self.jitter > 0.0 { 1.0 + rng.random_range(-self.jitter..=self.jitter) } else { 1.0 };
        SimTime::from_secs_f64(base * factor)
    }

    /// Transfer time of `size_gb` over the configured link.
    pub fn transfer_s(&self, size_gb: f64) -> f64 {
        size_gb * 8.0 / self.link_gbps
    }
}
