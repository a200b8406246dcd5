//! Workload placement inside machine-config-pool boundaries, plus eviction
//! and redeployment after node failures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::json;

use crate::cluster::{Actor, Arch, ClusterError, ClusterSim, CoreSet, GpuSlot, Node, NodeState, SyncState, VfHandle, VfRequest};
use crate::time::SimTime;

pub type WorkloadId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkloadRequirements {
    pub name: String,
    pub namespace: String,
    pub pool_selector: String,
    #[serde(default)]
    pub needs_gpu: bool,
    /// Substring the GPU model must contain, e.g. "GH200".
    #[serde(default)]
    pub gpu_model: Option<String>,
    #[serde(default)]
    pub vf_requests: Vec<VfRequest>,
    #[serde(default)]
    pub isolated_cores: u32,
    #[serde(default)]
    pub arch: Option<Arch>,
    /// Fronthaul workloads only run on PTP-locked nodes.
    #[serde(default)]
    pub needs_ptp_lock: bool,
}

impl WorkloadRequirements {
    pub fn new(name: impl Into<String>, pool: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            namespace: "default".into(),
            pool_selector: pool.into(),
            needs_gpu: false,
            gpu_model: None,
            vf_requests: Vec::new(),
            isolated_cores: 0,
            arch: None,
            needs_ptp_lock: false,
        }
    }

    pub fn namespace(mut self, ns: impl Into<String>) -> Self {
        self.namespace = ns.into();
        self
    }

    pub fn gpu(mut self, model: Option<&str>) -> Self {
        self.needs_gpu = true;
        self.gpu_model = model.map(str::to_owned);
        self
    }

    pub fn vf(mut self, request: VfRequest) -> Self {
        self.vf_requests.push(request);
        self
    }

    pub fn cores(mut self, n: u32) -> Self {
        self.isolated_cores = n;
        self
    }

    pub fn arch(mut self, arch: Arch) -> Self {
        self.arch = Some(arch);
        self
    }

    pub fn ptp(mut self) -> Self {
        self.needs_ptp_lock = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementState {
    Pending,
    Running,
    Evicting,
    Evicted,
    Terminated,
}

impl PlacementState {
    /// Still holding node resources.
    pub fn is_active(self) -> bool {
        matches!(self, PlacementState::Pending | PlacementState::Running | PlacementState::Evicting)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub id: WorkloadId,
    pub requirements: WorkloadRequirements,
    pub pool: String,
    pub node: String,
    pub vfs: Vec<VfHandle>,
    pub cores: CoreSet,
    pub gpu: Option<GpuSlot>,
    pub state: PlacementState,
    pub placed_at: SimTime,
    /// Eviction deadline while evicting; `None` with an infinite timeout.
    pub evict_at: Option<SimTime>,
    /// The evicted placement this one replaces.
    pub replaces: Option<WorkloadId>,
}

impl Placement {
    /// Owner tag used in node resource accounting.
    pub fn owner(&self) -> String {
        owner_tag(&self.requirements.name, self.id)
    }
}

fn owner_tag(name: &str, id: WorkloadId) -> String {
    format!("{name}#{id}")
}

/// First requirement a candidate node fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Unsatisfied {
    NotReady { state: NodeState },
    Arch { wanted: Arch, found: Arch },
    PtpNotLocked,
    NoGpu,
    NoGpuPartition,
    Cores { requested: u32, free: u32 },
    Vfs { requested: u32, max_free: u32 },
}

impl fmt::Display for Unsatisfied {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unsatisfied::NotReady { state } => write!(f, "node is {state}"),
            Unsatisfied::Arch { wanted, found } => write!(f, "arch {found:?} != {wanted:?}"),
            Unsatisfied::PtpNotLocked => f.write_str("PTP not locked"),
            Unsatisfied::NoGpu => f.write_str("no matching GPU"),
            Unsatisfied::NoGpuPartition => f.write_str("no free GPU partition"),
            Unsatisfied::Cores { requested, free } => write!(f, "{free} isolated cores free, {requested} requested"),
            Unsatisfied::Vfs { requested, max_free } => write!(f, "{max_free} VFs free on best NIC, {requested} requested"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedError {
    #[error("unknown pool `{0}`")]
    UnknownPool(String),
    #[error("no feasible node for `{workload}` in pool `{pool}`{}", render_reasons(.reasons))]
    NoFeasibleNode { workload: String, pool: String, reasons: Vec<(String, Unsatisfied)> },
    #[error("unknown placement {0}")]
    UnknownPlacement(WorkloadId),
    #[error("placement {id} is {state:?}")]
    InvalidState { id: WorkloadId, state: PlacementState },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

fn render_reasons(reasons: &[(String, Unsatisfied)]) -> String {
    if reasons.is_empty() {
        return ": pool has no nodes".into();
    }
    let parts: Vec<String> = reasons.iter().map(|(n, r)| format!("{n}: {r}")).collect();
    format!(" ({})", parts.join("; "))
}

impl SchedError {
    /// True when every candidate failed only on virtual functions.
    pub fn is_vf_exhaustion(&self) -> bool {
        matches!(self, SchedError::NoFeasibleNode { reasons, .. }
            if !reasons.is_empty() && reasons.iter().all(|(_, r)| matches!(r, Unsatisfied::Vfs { .. })))
    }
}

/// Grace period between an observed node failure and eviction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvictionTimeout {
    #[default]
    Default,
    After(SimTime),
    Never,
}

impl EvictionTimeout {
    pub const DEFAULT_SECS: u64 = 300;

    pub fn duration(self) -> Option<SimTime> {
        match self {
            EvictionTimeout::Default => Some(SimTime::from_secs(Self::DEFAULT_SECS)),
            EvictionTimeout::After(d) => Some(d),
            EvictionTimeout::Never => None,
        }
    }
}

impl FromStr for EvictionTimeout {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "never" | "inf" | "infinite" => Ok(EvictionTimeout::Never),
            t => {
                let secs: f64 = t.parse().map_err(|_| format!("`{s}` is not a number of seconds or `never`"))?;
                if !(secs >= 0.0 && secs.is_finite()) {
                    return Err(format!("eviction timeout must be >= 0, got {s}"));
                }
                Ok(EvictionTimeout::After(SimTime::from_secs_f64(secs)))
            }
        }
    }
}

impl fmt::Display for EvictionTimeout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.duration() {
            Some(d) => write!(f, "{}", d.as_secs_f64()),
            None => f.write_str("never"),
        }
    }
}

impl Serialize for EvictionTimeout {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.duration() {
            Some(d) => s.serialize_f64(d.as_secs_f64()),
            None => s.serialize_str("never"),
        }
    }
}

impl<'de> Deserialize<'de> for EvictionTimeout {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::Number(n) => n.to_string().parse().map_err(serde::de::Error::custom),
            serde_json::Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("bad eviction timeout {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvictionTimer {
    pub placement: WorkloadId,
    /// `None` when the timeout is infinite.
    pub expires: Option<SimTime>,
}

#[derive(Debug, Default)]
pub struct Scheduler {
    placements: BTreeMap<WorkloadId, Placement>,
    next_id: WorkloadId,
    timeout: EvictionTimeout,
    observed_failed: BTreeSet<String>,
}

impl Scheduler {
    pub fn new(timeout: EvictionTimeout) -> Self {
        Self { timeout, ..Self::default() }
    }

    pub fn eviction_timeout(&self) -> EvictionTimeout {
        self.timeout
    }

    pub fn set_eviction_timeout(&mut self, t: EvictionTimeout) {
        self.timeout = t;
    }

    pub fn get(&self, id: WorkloadId) -> Option<&Placement> {
        self.placements.get(&id)
    }

    pub fn placements(&self) -> impl Iterator<Item = &Placement> {
        self.placements.values()
    }

    pub fn active_on<'a>(&'a self, node: &'a str) -> impl Iterator<Item = &'a Placement> + 'a {
        self.placements.values().filter(move |p| p.node == node && p.state.is_active())
    }

    fn load(&self, node: &str) -> usize {
        self.active_on(node).count()
    }

    fn check(node: &Node, req: &WorkloadRequirements) -> Result<(), Unsatisfied> {
        if node.state != NodeState::Ready {
            return Err(Unsatisfied::NotReady { state: node.state });
        }
        if let Some(wanted) = req.arch.filter(|a| *a != node.spec.arch) {
            return Err(Unsatisfied::Arch { wanted, found: node.spec.arch });
        }
        if req.needs_ptp_lock && node.ptp_state != SyncState::Locked {
            return Err(Unsatisfied::PtpNotLocked);
        }
        if req.needs_gpu {
            let model = req.gpu_model.as_deref();
            if !node.spec.gpus.iter().any(|g| model.is_none_or(|m| g.model.contains(m))) {
                return Err(Unsatisfied::NoGpu);
            }
            if node.free_gpu_slot(model).is_none() {
                return Err(Unsatisfied::NoGpuPartition);
            }
        }
        let free = node.free_isolated_cores().len() as u32;
        if free < req.isolated_cores {
            return Err(Unsatisfied::Cores { requested: req.isolated_cores, free });
        }
        let need = req.vf_requests.len() as u32;
        if need > 0 && Self::pick_nic(node, need).is_none() {
            let max_free = node.nics.values().map(|p| p.free()).max().unwrap_or(0);
            return Err(Unsatisfied::Vfs { requested: need, max_free });
        }
        Ok(())
    }

    /// All VFs of one workload come from a single NIC, lowest id first.
    fn pick_nic(node: &Node, need: u32) -> Option<String> {
        node.nics.values().find(|p| p.free() >= need).map(|p| p.nic.clone())
    }

    /// Finds the best feasible node in the requested pool without debiting
    /// anything.
    pub fn select(&self, sim: &ClusterSim, req: &WorkloadRequirements) -> Result<String, SchedError> {
        if sim.pool(&req.pool_selector).is_none() {
            return Err(SchedError::UnknownPool(req.pool_selector.clone()));
        }
        let mut reasons = Vec::new();
        let mut best: Option<(usize, &str)> = None;
        for node in sim.nodes_in_pool(&req.pool_selector) {
            match Self::check(node, req) {
                Ok(()) => {
                    let key = (self.load(node.id()), node.id());
                    if best.is_none_or(|b| key < b) {
                        best = Some(key);
                    }
                }
                Err(r) => reasons.push((node.id().to_owned(), r)),
            }
        }
        best.map(|(_, id)| id.to_owned()).ok_or_else(|| SchedError::NoFeasibleNode {
            workload: req.name.clone(),
            pool: req.pool_selector.clone(),
            reasons,
        })
    }

    /// Places a workload and debits its VFs, cores and GPU partition.
    pub fn place(&mut self, sim: &mut ClusterSim, req: WorkloadRequirements) -> Result<&Placement, SchedError> {
        self.place_inner(sim, req, None)
    }

    fn place_inner(&mut self, sim: &mut ClusterSim, req: WorkloadRequirements, replaces: Option<WorkloadId>) -> Result<&Placement, SchedError> {
        let node_id = self.select(sim, &req)?;
        let id = self.next_id;
        let owner = owner_tag(&req.name, id);
        let node = sim.node(&node_id).expect("selected node exists");
        let nic = Self::pick_nic(node, req.vf_requests.len() as u32);
        let mut vfs = Vec::new();
        let grant = (|| -> Result<(Vec<u32>, Option<GpuSlot>), ClusterError> {
            if let Some(nic) = &nic {
                for r in &req.vf_requests {
                    vfs.push(sim.allocate_vf(&node_id, nic, *r, &owner)?);
                }
            }
            let cores = sim.reserve_cores(&node_id, req.isolated_cores, &owner)?;
            let gpu = if req.needs_gpu { Some(sim.reserve_gpu_slot(&node_id, req.gpu_model.as_deref(), &owner)?) } else { None };
            Ok((cores, gpu))
        })();
        let (cores, gpu) = match grant {
            Ok(g) => g,
            Err(e) => {
                for h in &vfs {
                    let _ = sim.release_vf(h);
                }
                sim.release_cores(&node_id, &owner);
                return Err(e.into());
            }
        };
        self.next_id += 1;
        let placement = Placement {
            id,
            pool: req.pool_selector.clone(),
            requirements: req,
            node: node_id,
            vfs,
            cores: cores.into_iter().collect(),
            gpu,
            state: PlacementState::Pending,
            placed_at: sim.now(),
            evict_at: None,
            replaces,
        };
        sim.log(
            "workload_placed",
            json!({
                "workload": placement.owner(),
                "node": placement.node,
                "pool": placement.pool,
                "vfs": placement.vfs.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
                "cores": placement.cores,
                "gpu": placement.gpu,
                "replaces": replaces,
            }),
        );
        Ok(self.placements.entry(id).or_insert(placement))
    }

    fn get_mut(&mut self, id: WorkloadId) -> Result<&mut Placement, SchedError> {
        self.placements.get_mut(&id).ok_or(SchedError::UnknownPlacement(id))
    }

    pub fn mark_running(&mut self, sim: &mut ClusterSim, id: WorkloadId) -> Result<(), SchedError> {
        let p = self.get_mut(id)?;
        if p.state != PlacementState::Pending {
            return Err(SchedError::InvalidState { id, state: p.state });
        }
        let node = sim.node(&p.node).ok_or_else(|| ClusterError::UnknownNode(p.node.clone()))?;
        if node.state != NodeState::Ready {
            return Err(ClusterError::NodeNotReady { node: p.node.clone(), state: node.state }.into());
        }
        p.state = PlacementState::Running;
        let owner = p.owner();
        sim.log("workload_running", json!({ "workload": owner }));
        Ok(())
    }

    fn release(sim: &mut ClusterSim, p: &Placement) {
        for h in &p.vfs {
            let _ = sim.release_vf(h);
        }
        sim.release_cores(&p.node, &p.owner());
        if let Some(slot) = p.gpu {
            sim.release_gpu_slot(&p.node, slot);
        }
    }

    /// Stops a workload and returns its resources.
    pub fn terminate(&mut self, sim: &mut ClusterSim, id: WorkloadId) -> Result<(), SchedError> {
        let p = self.get_mut(id)?;
        if !p.state.is_active() {
            return Err(SchedError::InvalidState { id, state: p.state });
        }
        p.state = PlacementState::Terminated;
        p.evict_at = None;
        let p = p.clone();
        Self::release(sim, &p);
        sim.log("workload_terminated", json!({ "workload": p.owner() }));
        Ok(())
    }

    fn evict(&mut self, sim: &mut ClusterSim, id: WorkloadId, reason: &str) {
        let Some(p) = self.placements.get_mut(&id) else { return };
        p.state = PlacementState::Evicted;
        p.evict_at = None;
        let p = p.clone();
        Self::release(sim, &p);
        sim.log("workload_evicted", json!({ "workload": p.owner(), "node": p.node, "reason": reason }));
    }

    /// Starts an eviction timer for every active placement on a node whose
    /// failure the control plane just observed.
    pub fn on_node_failure_observed(&mut self, sim: &mut ClusterSim, node: &str) -> Vec<EvictionTimer> {
        self.observed_failed.insert(node.to_owned());
        let now = sim.now();
        let expires = self.timeout.duration().map(|d| now + d);
        let ids: Vec<WorkloadId> = self.placements.values().filter(|p| p.node == node && matches!(p.state, PlacementState::Pending | PlacementState::Running)).map(|p| p.id).collect();
        let mut timers = Vec::new();
        for id in ids {
            let p = self.placements.get_mut(&id).expect("listed above");
            p.state = PlacementState::Evicting;
            p.evict_at = expires;
            let owner = p.owner();
            if let Some(at) = expires {
                sim.schedule_wake(at, Actor::Scheduler, id);
            }
            sim.log("eviction_timer", json!({ "workload": owner, "expires": expires }));
            timers.push(EvictionTimer { placement: id, expires });
        }
        timers
    }

    /// Handles a scheduler wake-up. Returns the evicted placement, if any.
    pub fn handle_wake(&mut self, sim: &mut ClusterSim, token: u64) -> Option<WorkloadId> {
        let p = self.placements.get(&token)?;
        if p.state != PlacementState::Evicting || p.evict_at != Some(sim.now()) {
            return None;
        }
        self.evict(sim, token, "node_failure");
        Some(token)
    }

    /// Node came back; forget the observed failure.
    pub fn on_node_recovered(&mut self, node: &str) {
        self.observed_failed.remove(node);
    }

    /// Evicts everything on a node right away (relabel or maintenance).
    pub fn drain_node(&mut self, sim: &mut ClusterSim, node: &str) -> Vec<WorkloadId> {
        let ids: Vec<WorkloadId> = self.active_on(node).map(|p| p.id).collect();
        for id in &ids {
            self.evict(sim, *id, "drain");
        }
        ids
    }

    /// Places an evicted workload again, restricted to its original pool.
    pub fn redeploy(&mut self, sim: &mut ClusterSim, id: WorkloadId) -> Result<&Placement, SchedError> {
        let p = self.get_mut(id)?;
        if p.state != PlacementState::Evicted {
            return Err(SchedError::InvalidState { id, state: p.state });
        }
        let mut req = p.requirements.clone();
        req.pool_selector = p.pool.clone();
        self.place_inner(sim, req, Some(id))
    }

    /// Checks feasibility, pool confinement and resource accounting against
    /// the cluster.
    pub fn audit(&self, sim: &ClusterSim) -> Result<(), String> {
        let mut owners: BTreeSet<String> = BTreeSet::new();
        for p in self.placements.values() {
            if let Some(orig) = p.replaces.and_then(|r| self.placements.get(&r)) {
                if orig.pool != p.pool {
                    return Err(format!("{} redeployed across pools ({} -> {})", p.owner(), orig.pool, p.pool));
                }
            }
            if !p.state.is_active() {
                continue;
            }
            let owner = p.owner();
            let node = sim.node(&p.node).ok_or_else(|| format!("{owner} on missing node {}", p.node))?;
            if p.state == PlacementState::Running {
                let unobserved_failure = node.state == NodeState::Failed && !self.observed_failed.contains(&p.node);
                if node.state != NodeState::Ready && !unobserved_failure {
                    return Err(format!("{owner} running on {} node {}", node.state, p.node));
                }
            }
            if node.pool != p.pool {
                return Err(format!("{owner} placed in pool {} but node is in {}", p.pool, node.pool));
            }
            for h in &p.vfs {
                let held = node.nics.get(&h.nic).and_then(|n| n.allocated.get(&h.index)).is_some_and(|a| a.owner == owner);
                if !held {
                    return Err(format!("{owner} lost VF {h}"));
                }
            }
            for c in p.cores.iter() {
                if node.core_grants.get(&c).is_none_or(|o| *o != owner) {
                    return Err(format!("{owner} lost core {c}"));
                }
            }
            if let Some(slot) = p.gpu {
                let held = node.gpu_slots.get(slot.gpu as usize).and_then(|g| g.get(slot.slot as usize)).is_some_and(|o| o.as_deref() == Some(&owner));
                if !held {
                    return Err(format!("{owner} lost GPU partition {slot:?}"));
                }
            }
            owners.insert(owner);
        }
        for node in sim.nodes() {
            let leaked = node
                .nics
                .values()
                .flat_map(|n| n.allocated.values().map(|a| &a.owner))
                .chain(node.core_grants.values())
                .chain(node.gpu_slots.iter().flatten().flatten())
                .find(|o| !owners.contains(*o));
            if let Some(o) = leaked {
                return Err(format!("{}: resource held by inactive owner {o}", node.id()));
            }
        }
        Ok(())
    }
}
