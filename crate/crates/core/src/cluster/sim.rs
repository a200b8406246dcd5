use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::node::{GpuSlot, Node, NodeSpec, NodeState, VfAllocation, VfHandle, VfRequest};
use super::profile::{ProfileBundle, SyncState};
use super::ClusterError;
use crate::time::SimTime;

/// Components that receive timer wake-ups through the shared queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Scheduler,
    Pipeline,
    Orchestrator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    NodeReady { node: String, generation: u64 },
    ReconfigDone { node: String, generation: u64 },
    PtpLocked { node: String, generation: u64 },
    NodeFailed { node: String },
    FailureObserved { node: String, failed_at: SimTime },
    Wake { actor: Actor, token: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FiredEvent {
    pub time: SimTime,
    pub seq: u64,
    pub event: Event,
}

struct Queued(FiredEvent);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // min-heap on (time, seq)
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.time, other.0.seq).cmp(&(self.0.time, self.0.seq))
    }
}

/// Simulated clock plus pending-event queue. Equal-time events fire in
/// insertion order.
#[derive(Default)]
pub struct SimClock {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Queued>,
}

impl SimClock {
    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, at: SimTime, event: Event) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(FiredEvent { time: at.max(self.now), seq, event }));
        seq
    }

    pub fn peek_time(&self) -> Option<SimTime> {
        self.queue.peek().map(|q| q.0.time)
    }

    /// Pops the next event due at or before `until`, advancing `now` to it.
    pub fn pop_due(&mut self, until: SimTime) -> Option<FiredEvent> {
        if self.peek_time()? > until {
            return None;
        }
        let ev = self.queue.pop()?.0;
        self.now = ev.time;
        Some(ev)
    }

    pub fn advance_to(&mut self, t: SimTime) {
        self.now = self.now.max(t);
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub time: SimTime,
    pub event: String,
    pub payload: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadKind {
    /// CPU stress on the shared (reserved) cores.
    SharedCores,
    /// CPU stress pinned to `count` isolated cores not granted to workloads.
    IsolatedCores { count: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadEvent {
    pub node: String,
    pub kind: LoadKind,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Failure-to-observation delay of the control plane.
    pub detection_delay: SimTime,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { detection_delay: SimTime::from_secs(40), seed: 0 }
    }
}

/// Deterministic cluster simulation: pools, nodes, NIC pools, PTP health and
/// the shared event queue.
pub struct ClusterSim {
    config: SimConfig,
    clock: SimClock,
    pools: BTreeMap<String, ProfileBundle>,
    nodes: BTreeMap<String, Node>,
    loads: Vec<LoadEvent>,
    log: Vec<LogEntry>,
}

impl ClusterSim {
    pub fn new(config: SimConfig) -> Self {
        Self { config, clock: SimClock::default(), pools: BTreeMap::new(), nodes: BTreeMap::new(), loads: Vec::new(), log: Vec::new() }
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn set_detection_delay(&mut self, d: SimTime) {
        self.config.detection_delay = d;
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn now(&self) -> SimTime {
        self.clock.now()
    }

    pub fn pending_events(&self) -> usize {
        self.clock.pending()
    }

    pub fn next_event_time(&self) -> Option<SimTime> {
        self.clock.peek_time()
    }

    pub fn log(&mut self, event: &str, payload: Value) {
        self.log.push(LogEntry { time: self.now(), event: event.to_owned(), payload });
    }

    pub fn event_log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Event log as JSON lines.
    pub fn event_log_jsonl(&self) -> String {
        self.log.iter().map(|e| serde_json::to_string(e).expect("log entry serializes") + "\n").collect()
    }

    pub fn schedule_wake(&mut self, at: SimTime, actor: Actor, token: u64) {
        self.clock.schedule(at, Event::Wake { actor, token });
    }

    pub fn register_pool(&mut self, bundle: ProfileBundle) {
        self.log("pool_registered", json!({ "pool": bundle.name }));
        self.pools.insert(bundle.name.clone(), bundle);
    }

    pub fn pool(&self, name: &str) -> Option<&ProfileBundle> {
        self.pools.get(name)
    }

    pub fn pools(&self) -> impl Iterator<Item = &ProfileBundle> {
        self.pools.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn nodes_in_pool<'a>(&'a self, pool: &'a str) -> impl Iterator<Item = &'a Node> + 'a {
        self.nodes.values().filter(move |n| n.pool == pool)
    }

    fn node_mut(&mut self, id: &str) -> Result<&mut Node, ClusterError> {
        self.nodes.get_mut(id).ok_or_else(|| ClusterError::UnknownNode(id.to_owned()))
    }

    fn ready_node_mut(&mut self, id: &str) -> Result<&mut Node, ClusterError> {
        let node = self.node_mut(id)?;
        if node.state != NodeState::Ready {
            return Err(ClusterError::NodeNotReady { node: id.to_owned(), state: node.state });
        }
        Ok(node)
    }

    /// Onboards a node into `pool`; it becomes ready after the pool's
    /// provisioning time with the pool's profiles applied.
    pub fn add_node(&mut self, spec: NodeSpec, pool: &str) -> Result<String, ClusterError> {
        let bundle = self.pools.get(pool).ok_or_else(|| ClusterError::UnknownPool(pool.to_owned()))?;
        if self.nodes.contains_key(&spec.id) {
            return Err(ClusterError::DuplicateNode(spec.id));
        }
        if let Some(p) = &bundle.performance {
            p.check(spec.cpu_cores).map_err(|message| ClusterError::InvalidProfile { pool: pool.to_owned(), message })?;
        }
        let ready_at = self.now() + SimTime::from_secs_f64(bundle.provisioning_s);
        let id = spec.id.clone();
        self.nodes.insert(id.clone(), Node::new(spec, pool.to_owned()));
        self.clock.schedule(ready_at, Event::NodeReady { node: id.clone(), generation: 0 });
        self.log("node_added", json!({ "node": id, "pool": pool, "ready_at": ready_at }));
        Ok(id)
    }

    /// Inserts a node that is already provisioned: ready now, profiles
    /// applied, PTP locked when its pool has a PTP profile.
    pub fn add_provisioned_node(&mut self, spec: NodeSpec, pool: &str) -> Result<String, ClusterError> {
        let bundle = self.pools.get(pool).ok_or_else(|| ClusterError::UnknownPool(pool.to_owned()))?.clone();
        if self.nodes.contains_key(&spec.id) {
            return Err(ClusterError::DuplicateNode(spec.id));
        }
        if let Some(p) = &bundle.performance {
            p.check(spec.cpu_cores).map_err(|message| ClusterError::InvalidProfile { pool: pool.to_owned(), message })?;
        }
        let id = spec.id.clone();
        let mut node = Node::new(spec, pool.to_owned());
        node.apply_bundle(&bundle, false);
        node.state = NodeState::Ready;
        if bundle.ptp.is_some() {
            node.ptp_state = SyncState::Locked;
        }
        self.nodes.insert(id.clone(), node);
        self.log("node_ready", json!({ "node": id, "pool": pool }));
        Ok(id)
    }

    /// Moves a node to another pool. Returns `false` for a same-pool no-op.
    /// The node is cordoned and rebooting until the new pool's profiles land;
    /// any leftover grants are dropped (callers drain workloads first).
    pub fn relabel_node(&mut self, id: &str, pool: &str) -> Result<bool, ClusterError> {
        let reconfig = self.pools.get(pool).ok_or_else(|| ClusterError::UnknownPool(pool.to_owned()))?.reconfig_s;
        let now = self.now();
        let node = self.node_mut(id)?;
        match node.state {
            NodeState::Failed => return Err(ClusterError::NodeFailed(id.to_owned())),
            NodeState::Provisioning => return Err(ClusterError::NodeNotReady { node: id.to_owned(), state: node.state }),
            NodeState::Ready | NodeState::Cordoned => {}
        }
        if node.pool == pool {
            return Ok(false);
        }
        let from = std::mem::replace(&mut node.pool, pool.to_owned());
        node.clear_profiles();
        node.state = NodeState::Cordoned;
        node.reconfiguring = true;
        node.generation += 1;
        let generation = node.generation;
        let back_at = now + SimTime::from_secs_f64(reconfig);
        self.clock.schedule(back_at, Event::ReconfigDone { node: id.to_owned(), generation });
        self.log("node_relabeled", json!({ "node": id, "from": from, "to": pool, "ready_at": back_at }));
        Ok(true)
    }

    pub fn cordon(&mut self, id: &str) -> Result<(), ClusterError> {
        let node = self.ready_node_mut(id)?;
        node.state = NodeState::Cordoned;
        self.log("node_cordoned", json!({ "node": id }));
        Ok(())
    }

    pub fn uncordon(&mut self, id: &str) -> Result<(), ClusterError> {
        let node = self.node_mut(id)?;
        if node.state != NodeState::Cordoned || node.reconfiguring {
            return Err(ClusterError::NodeNotReady { node: id.to_owned(), state: node.state });
        }
        node.state = NodeState::Ready;
        self.log("node_uncordoned", json!({ "node": id }));
        Ok(())
    }

    /// Schedules a failure at `at`; the control plane observes it after the
    /// detection delay.
    pub fn inject_failure(&mut self, id: &str, at: SimTime) -> Result<SimTime, ClusterError> {
        let node = self.node_mut(id)?;
        if node.state == NodeState::Failed {
            return Err(ClusterError::NodeFailed(id.to_owned()));
        }
        let at = at.max(self.now());
        let observed = at + self.config.detection_delay;
        self.clock.schedule(at, Event::NodeFailed { node: id.to_owned() });
        self.clock.schedule(observed, Event::FailureObserved { node: id.to_owned(), failed_at: at });
        self.log("failure_scheduled", json!({ "node": id, "at": at, "observed_at": observed }));
        Ok(observed)
    }

    /// Re-adds a failed node; it provisions again with its pool's bundle.
    pub fn recover_node(&mut self, id: &str) -> Result<SimTime, ClusterError> {
        let now = self.now();
        let pool = self.node(id).ok_or_else(|| ClusterError::UnknownNode(id.to_owned()))?.pool.clone();
        let provisioning = self.pools.get(&pool).map_or(2400.0, |b| b.provisioning_s);
        let node = self.node_mut(id)?;
        if node.state != NodeState::Failed {
            return Err(ClusterError::NodeNotReady { node: id.to_owned(), state: node.state });
        }
        node.state = NodeState::Provisioning;
        node.generation += 1;
        let generation = node.generation;
        let ready_at = now + SimTime::from_secs_f64(provisioning);
        self.clock.schedule(ready_at, Event::NodeReady { node: id.to_owned(), generation });
        self.log("node_recovering", json!({ "node": id, "ready_at": ready_at }));
        Ok(ready_at)
    }

    pub fn set_ptp_state(&mut self, id: &str, state: SyncState) -> Result<(), ClusterError> {
        self.node_mut(id)?.ptp_state = state;
        self.log("ptp_state", json!({ "node": id, "state": state }));
        Ok(())
    }

    pub fn allocate_vf(&mut self, id: &str, nic: &str, request: VfRequest, owner: &str) -> Result<VfHandle, ClusterError> {
        let node = self.ready_node_mut(id)?;
        let pool = node.nics.get_mut(nic).ok_or_else(|| ClusterError::UnknownNic { node: id.to_owned(), nic: nic.to_owned() })?;
        let index = pool.lowest_free_index().ok_or_else(|| ClusterError::VfExhausted { node: id.to_owned(), nic: nic.to_owned() })?;
        pool.allocated.insert(index, VfAllocation { owner: owner.to_owned(), vlan: request.vlan, mtu: request.mtu });
        pool.allocations_total += 1;
        let handle = VfHandle { node: id.to_owned(), nic: nic.to_owned(), index };
        self.log("vf_allocated", json!({ "vf": handle.to_string(), "owner": owner, "vlan": request.vlan, "mtu": request.mtu }));
        Ok(handle)
    }

    pub fn release_vf(&mut self, handle: &VfHandle) -> Result<(), ClusterError> {
        let node = self.node_mut(&handle.node)?;
        let pool = node
            .nics
            .get_mut(&handle.nic)
            .ok_or_else(|| ClusterError::UnknownNic { node: handle.node.clone(), nic: handle.nic.clone() })?;
        if pool.allocated.remove(&handle.index).is_none() {
            return Err(ClusterError::UnknownVf(handle.clone()));
        }
        pool.releases_total += 1;
        self.log("vf_released", json!({ "vf": handle.to_string() }));
        Ok(())
    }

    pub(crate) fn reserve_cores(&mut self, id: &str, count: u32, owner: &str) -> Result<Vec<u32>, ClusterError> {
        let node = self.ready_node_mut(id)?;
        let free = node.free_isolated_cores();
        if (free.len() as u32) < count {
            return Err(ClusterError::InsufficientCores { node: id.to_owned(), requested: count, free: free.len() as u32 });
        }
        let granted: Vec<u32> = free.into_iter().take(count as usize).collect();
        for c in &granted {
            node.core_grants.insert(*c, owner.to_owned());
        }
        Ok(granted)
    }

    pub(crate) fn release_cores(&mut self, id: &str, owner: &str) {
        if let Some(node) = self.nodes.get_mut(id) {
            node.core_grants.retain(|_, o| o != owner);
        }
    }

    pub(crate) fn reserve_gpu_slot(&mut self, id: &str, model: Option<&str>, owner: &str) -> Result<GpuSlot, ClusterError> {
        let node = self.ready_node_mut(id)?;
        let slot = node.free_gpu_slot(model).ok_or_else(|| ClusterError::NoGpuSlot(id.to_owned()))?;
        node.gpu_slots[slot.gpu as usize][slot.slot as usize] = Some(owner.to_owned());
        Ok(slot)
    }

    pub(crate) fn release_gpu_slot(&mut self, id: &str, slot: GpuSlot) {
        if let Some(s) = self.nodes.get_mut(id).and_then(|n| n.gpu_slots.get_mut(slot.gpu as usize)).and_then(|g| g.get_mut(slot.slot as usize)) {
            *s = None;
        }
    }

    /// Records a CPU load event; consumers read it through [`Self::loads_on`].
    pub fn inject_load(&mut self, id: &str, kind: LoadKind, duration: SimTime) -> Result<(), ClusterError> {
        self.node_mut(id)?;
        let start = self.now();
        let ev = LoadEvent { node: id.to_owned(), kind, start, end: start + duration };
        self.log("load_injected", json!({ "node": id, "load": kind, "until": ev.end }));
        self.loads.push(ev);
        Ok(())
    }

    pub fn loads_on(&self, node: &str, from: SimTime, to: SimTime) -> Vec<&LoadEvent> {
        self.loads.iter().filter(|l| l.node == node && l.start < to.max(from + SimTime::from_millis(1)) && l.end > from).collect()
    }

    /// Fires the next event due at or before `until`, applying its effect on
    /// cluster state. Wake-ups are returned untouched for their actor.
    pub fn step(&mut self, until: SimTime) -> Option<FiredEvent> {
        let fired = self.clock.pop_due(until)?;
        self.apply(&fired.event);
        Some(fired)
    }

    /// Fires everything due up to `until` and leaves `now == until`.
    pub fn tick(&mut self, until: SimTime) -> Vec<FiredEvent> {
        if until < self.now() {
            return Vec::new();
        }
        let mut fired = Vec::new();
        while let Some(ev) = self.step(until) {
            fired.push(ev);
        }
        self.clock.advance_to(until);
        fired
    }

    pub fn advance_to(&mut self, t: SimTime) {
        self.clock.advance_to(t);
    }

    fn apply(&mut self, event: &Event) {
        match event {
            Event::NodeReady { node, generation } | Event::ReconfigDone { node, generation } => {
                let Some(n) = self.nodes.get(node) else { return };
                if n.generation != *generation {
                    return;
                }
                let Some(bundle) = self.pools.get(&n.pool).cloned() else { return };
                let n = self.nodes.get_mut(node).expect("checked above");
                let recovering = n.applied.is_some();
                n.apply_bundle(&bundle, recovering);
                n.state = NodeState::Ready;
                n.reconfiguring = false;
                let lock_at = bundle.ptp.as_ref().map(|p| p.lock_time_s);
                n.ptp_state = match lock_at {
                    Some(t) if t <= 0.0 => SyncState::Locked,
                    _ => SyncState::Unsynced,
                };
                let generation = n.generation;
                if let Some(t) = lock_at.filter(|t| *t > 0.0) {
                    let at = self.now() + SimTime::from_secs_f64(t);
                    self.clock.schedule(at, Event::PtpLocked { node: node.clone(), generation });
                }
                let kind = if matches!(event, Event::NodeReady { .. }) { "node_ready" } else { "node_reconfigured" };
                self.log(kind, json!({ "node": node, "pool": bundle.name }));
            }
            Event::PtpLocked { node, generation } => {
                if let Some(n) = self.nodes.get_mut(node).filter(|n| n.generation == *generation && n.state == NodeState::Ready) {
                    n.ptp_state = SyncState::Locked;
                    self.log("ptp_locked", json!({ "node": node }));
                }
            }
            Event::NodeFailed { node } => {
                if let Some(n) = self.nodes.get_mut(node).filter(|n| n.state != NodeState::Failed) {
                    let was = n.state;
                    n.state = NodeState::Failed;
                    n.reconfiguring = false;
                    n.ptp_state = SyncState::Unsynced;
                    n.generation += 1;
                    self.log("node_failed", json!({ "node": node, "was": was }));
                }
            }
            Event::FailureObserved { node, failed_at } => {
                self.log("failure_observed", json!({ "node": node, "failed_at": failed_at }));
            }
            Event::Wake { .. } => {}
        }
    }

    /// Checks VF conservation and profile coverage on every node.
    pub fn audit(&self) -> Result<(), String> {
        for node in self.nodes.values() {
            for pool in node.nics.values() {
                if pool.allocated.len() as u32 > pool.enabled || pool.enabled > pool.vf_capacity {
                    return Err(format!("{}: VF pool {} over capacity", node.id(), pool.nic));
                }
                if pool.allocations_total - pool.releases_total != pool.allocated.len() as u64 {
                    return Err(format!("{}: VF accounting drift on {}", node.id(), pool.nic));
                }
            }
            if node.state == NodeState::Ready && node.applied.as_ref() != self.pools.get(&node.pool) {
                return Err(format!("{}: ready with stale or missing profiles", node.id()));
            }
            if let Some(p) = node.applied.as_ref().and_then(|b| b.performance.as_ref()) {
                if node.core_grants.keys().any(|c| !p.isolated.contains(*c)) {
                    return Err(format!("{}: core grant outside the isolated set", node.id()));
                }
            }
        }
        Ok(())
    }
}
