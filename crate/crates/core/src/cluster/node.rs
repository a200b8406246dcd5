use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::profile::{ProfileBundle, SyncState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arch {
    X86,
    Arm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpuSpec {
    pub model: String,
    pub memory_gb: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NicSpec {
    pub id: String,
    pub capacity_gbps: u32,
    /// Hardware VF limit; the pool's SR-IOV policy decides how many are enabled.
    #[serde(default = "default_vf_capacity")]
    pub vf_capacity: u32,
}

fn default_vf_capacity() -> u32 {
    8
}

/// Static hardware description of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: String,
    pub model: String,
    pub arch: Arch,
    pub cpu_cores: u32,
    #[serde(default)]
    pub gpus: Vec<GpuSpec>,
    #[serde(default)]
    pub nics: Vec<NicSpec>,
    #[serde(default)]
    pub labels: BTreeSet<String>,
}

impl NodeSpec {
    /// Lower-cased first word of the model, e.g. "gh200", "gigabyte".
    pub fn family(&self) -> String {
        self.model.split_whitespace().next().unwrap_or("").to_ascii_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Provisioning,
    Ready,
    Cordoned,
    Failed,
}

impl NodeState {
    /// Legal lifecycle edges: provisioning→ready, ready↔cordoned, any→failed,
    /// failed→provisioning.
    pub fn can_transition(self, to: NodeState) -> bool {
        use NodeState::*;
        matches!(
            (self, to),
            (Provisioning, Ready) | (Ready, Cordoned) | (Cordoned, Ready) | (Failed, Provisioning)
        ) || (to == Failed && self != Failed)
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NodeState::Provisioning => "provisioning",
            NodeState::Ready => "ready",
            NodeState::Cordoned => "cordoned",
            NodeState::Failed => "failed",
        };
        f.write_str(s)
    }
}

/// Identifies one granted virtual function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VfHandle {
    pub node: String,
    pub nic: String,
    pub index: u32,
}

impl fmt::Display for VfHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/vf{}", self.node, self.nic, self.index)
    }
}

/// VLAN and MTU for a VF request. `vlan: None` passes the port untagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VfRequest {
    pub vlan: Option<u16>,
    pub mtu: u32,
}

impl VfRequest {
    pub fn untagged(mtu: u32) -> Self {
        Self { vlan: None, mtu }
    }

    pub fn tagged(vlan: u16, mtu: u32) -> Self {
        Self { vlan: Some(vlan), mtu }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfAllocation {
    pub owner: String,
    pub vlan: Option<u16>,
    pub mtu: u32,
}

/// Per-NIC VF accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VfPool {
    pub nic: String,
    pub capacity_gbps: u32,
    pub vf_capacity: u32,
    /// VFs enabled by the pool's SR-IOV policy (≤ vf_capacity).
    pub enabled: u32,
    pub allocated: BTreeMap<u32, VfAllocation>,
    pub allocations_total: u64,
    pub releases_total: u64,
}

impl VfPool {
    pub fn free(&self) -> u32 {
        self.enabled.saturating_sub(self.allocated.len() as u32)
    }

    pub(crate) fn lowest_free_index(&self) -> Option<u32> {
        (0..self.enabled).find(|i| !self.allocated.contains_key(i))
    }
}

/// A GPU partition grant: (gpu index, slot index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GpuSlot {
    pub gpu: u32,
    pub slot: u32,
}

/// Runtime view of a node inside the simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub spec: NodeSpec,
    pub pool: String,
    pub state: NodeState,
    /// True while a relabel reboot is in progress.
    pub reconfiguring: bool,
    /// Bundle currently applied; `None` until the first provisioning completes.
    pub applied: Option<ProfileBundle>,
    pub ptp_state: SyncState,
    pub nics: BTreeMap<String, VfPool>,
    /// Per GPU, the owner of each partition slot.
    pub gpu_slots: Vec<Vec<Option<String>>>,
    /// Isolated core → owner.
    pub core_grants: BTreeMap<u32, String>,
    #[serde(skip)]
    pub(crate) generation: u64,
}

impl Node {
    pub(crate) fn new(spec: NodeSpec, pool: String) -> Self {
        Self {
            spec,
            pool,
            state: NodeState::Provisioning,
            reconfiguring: false,
            applied: None,
            ptp_state: SyncState::Unsynced,
            nics: BTreeMap::new(),
            gpu_slots: Vec::new(),
            core_grants: BTreeMap::new(),
            generation: 0,
        }
    }

    pub fn id(&self) -> &str {
        &self.spec.id
    }

    pub fn is_ready(&self) -> bool {
        self.state == NodeState::Ready
    }

    pub fn free_isolated_cores(&self) -> Vec<u32> {
        match self.applied.as_ref().and_then(|b| b.performance.as_ref()) {
            Some(p) => p.isolated.iter().filter(|c| !self.core_grants.contains_key(c)).collect(),
            None => Vec::new(),
        }
    }

    pub fn free_gpu_slot(&self, model: Option<&str>) -> Option<GpuSlot> {
        self.gpu_slots.iter().enumerate().find_map(|(g, slots)| {
            if model.is_some_and(|m| !self.spec.gpus[g].model.contains(m)) {
                return None;
            }
            slots.iter().position(Option::is_none).map(|s| GpuSlot { gpu: g as u32, slot: s as u32 })
        })
    }

    /// Installs the bundle's profiles. With `keep_grants` existing VF, core and
    /// GPU grants survive (node recovery); otherwise all accounting restarts.
    pub(crate) fn apply_bundle(&mut self, bundle: &ProfileBundle, keep_grants: bool) {
        let enabled_for = |nic: &NicSpec| bundle.sriov.as_ref().map_or(0, |p| p.num_vfs.min(nic.vf_capacity));
        let mut nics = BTreeMap::new();
        for nic in &self.spec.nics {
            let mut pool = VfPool {
                nic: nic.id.clone(),
                capacity_gbps: nic.capacity_gbps,
                vf_capacity: nic.vf_capacity,
                enabled: enabled_for(nic),
                allocated: BTreeMap::new(),
                allocations_total: 0,
                releases_total: 0,
            };
            if keep_grants {
                if let Some(old) = self.nics.remove(&nic.id) {
                    pool.allocated = old.allocated;
                    pool.allocations_total = old.allocations_total;
                    pool.releases_total = old.releases_total;
                    pool.enabled = pool.enabled.max(pool.allocated.keys().max().map_or(0, |m| m + 1));
                }
            }
            nics.insert(nic.id.clone(), pool);
        }
        self.nics = nics;
        let slots = bundle.gpu_partitions.max(1) as usize;
        let mut gpu_slots = vec![vec![None; slots]; self.spec.gpus.len()];
        if keep_grants {
            for (g, old) in self.gpu_slots.iter().enumerate() {
                for (s, owner) in old.iter().enumerate() {
                    if let Some(o) = owner {
                        if g < gpu_slots.len() && s < gpu_slots[g].len() {
                            gpu_slots[g][s] = Some(o.clone());
                        }
                    }
                }
            }
        } else {
            self.core_grants.clear();
        }
        self.gpu_slots = gpu_slots;
        self.applied = Some(bundle.clone());
    }

    pub(crate) fn clear_profiles(&mut self) {
        self.applied = None;
        self.nics.clear();
        self.gpu_slots.clear();
        self.core_grants.clear();
        self.ptp_state = SyncState::Unsynced;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_table_is_exact() {
        use NodeState::*;
        let all = [Provisioning, Ready, Cordoned, Failed];
        let allowed = [
            (Provisioning, Ready),
            (Ready, Cordoned),
            (Cordoned, Ready),
            (Provisioning, Failed),
            (Ready, Failed),
            (Cordoned, Failed),
            (Failed, Provisioning),
        ];
        for from in all {
            for to in all {
                assert_eq!(from.can_transition(to), allowed.contains(&(from, to)), "{from} -> {to}");
            }
        }
    }

    #[test]
    fn family_is_first_model_word() {
        let spec = NodeSpec {
            id: "n".into(),
            model: "Gigabyte E251".into(),
            arch: Arch::X86,
            cpu_cores: 24,
            gpus: vec![],
            nics: vec![],
            labels: BTreeSet::new(),
        };
        assert_eq!(spec.family(), "gigabyte");
    }
}
