use serde::{Deserialize, Serialize};

use super::cpuset::CoreSet;

/// Reserved/isolated cores, hugepages and real-time tuning for a pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceProfile {
    pub reserved: CoreSet,
    pub isolated: CoreSet,
    pub hugepage_size_bytes: u64,
    pub hugepage_count: u32,
    #[serde(default)]
    pub realtime: bool,
    #[serde(default)]
    pub high_power_consumption: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kernel_args: Vec<String>,
}

impl PerformanceProfile {
    /// Checks the core split against a node with `cpu_cores` cores.
    pub fn check(&self, cpu_cores: u32) -> Result<(), String> {
        if !self.reserved.is_disjoint(&self.isolated) {
            return Err("reserved and isolated core sets overlap".into());
        }
        for set in [&self.reserved, &self.isolated] {
            if set.max().is_some_and(|m| m >= cpu_cores) {
                return Err(format!("core set {set} exceeds the node's {cpu_cores} cores"));
            }
        }
        Ok(())
    }
}

/// Servo constants kept for fidelity of the profile data; no simulated effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtpServo {
    pub clock_servo: String,
    pub step_threshold: f64,
    pub pi_proportional_const: f64,
    pub pi_integral_const: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyncState {
    Locked,
    Holdover,
    Unsynced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtpProfile {
    pub name: String,
    pub interface: String,
    pub scheduling_policy: String,
    pub scheduling_priority: u32,
    pub domain_number: u32,
    pub max_offset_threshold_ns: i64,
    pub min_offset_threshold_ns: i64,
    pub holdover_timeout_s: u32,
    pub servo: PtpServo,
    /// Time from node ready to lock.
    #[serde(default)]
    pub lock_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SriovPolicy {
    pub resource_name: String,
    pub num_vfs: u32,
    pub mtu: u32,
}

/// Everything a machine-config pool applies to its nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBundle {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub performance: Option<PerformanceProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ptp: Option<PtpProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sriov: Option<SriovPolicy>,
    #[serde(default)]
    pub operators: Vec<String>,
    /// Equal partitions per GPU (MIG-style).
    #[serde(default = "default_gpu_partitions")]
    pub gpu_partitions: u32,
    #[serde(default = "default_provisioning_s")]
    pub provisioning_s: f64,
    /// Reboot plus profile application after a relabel.
    #[serde(default = "default_reconfig_s")]
    pub reconfig_s: f64,
}

fn default_gpu_partitions() -> u32 {
    2
}

fn default_provisioning_s() -> f64 {
    2400.0
}

fn default_reconfig_s() -> f64 {
    600.0
}

impl ProfileBundle {
    pub fn bare(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            performance: None,
            ptp: None,
            sriov: None,
            operators: Vec::new(),
            gpu_partitions: default_gpu_partitions(),
            provisioning_s: default_provisioning_s(),
            reconfig_s: default_reconfig_s(),
        }
    }

    pub fn isolated_cores(&self) -> usize {
        self.performance.as_ref().map_or(0, |p| p.isolated.len())
    }
}
