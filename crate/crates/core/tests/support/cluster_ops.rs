//! Random scheduler/cluster operation scripts with an independent resource
//! ledger.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use ranorch_core::cluster::{Actor, ClusterSeed, ClusterSim, Event, VfHandle, VfRequest};
use ranorch_core::scheduler::{EvictionTimeout, PlacementState, Scheduler, WorkloadId, WorkloadRequirements};
use ranorch_core::SimTime;

pub const POOLS: [&str; 5] = ["master", "worker-edge", "worker-gh", "worker-gb", "worker-mw"];

#[derive(Debug, Clone)]
pub enum Op {
    Place { pool: usize, gpu: bool, vfs: u8, cores: u8, ptp: bool },
    Terminate(usize),
    Fail(usize),
    Recover(usize),
    Advance(u16),
    Redeploy(usize),
    Vf { node: usize, release: bool },
    Relabel { node: usize, pool: usize },
}

pub fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        5 => (0..POOLS.len(), any::<bool>(), 0u8..4, 0u8..24, any::<bool>()).prop_map(|(pool, gpu, vfs, cores, ptp)| Op::Place { pool, gpu, vfs, cores, ptp }),
        3 => any::<usize>().prop_map(Op::Terminate),
        1 => any::<usize>().prop_map(Op::Fail),
        1 => any::<usize>().prop_map(Op::Recover),
        2 => (1u16..600).prop_map(Op::Advance),
        2 => any::<usize>().prop_map(Op::Redeploy),
        2 => (any::<usize>(), any::<bool>()).prop_map(|(node, release)| Op::Vf { node, release }),
        1 => (any::<usize>(), 0..POOLS.len()).prop_map(|(node, pool)| Op::Relabel { node, pool }),
    ]
}

/// Scheduler plus simulation driven by a random operation script.
pub struct Harness {
    pub sim: ClusterSim,
    pub sched: Scheduler,
    pub nodes: Vec<String>,
    raw_vfs: Vec<VfHandle>,
    redeploys: Vec<(WorkloadId, WorkloadId)>,
}

impl Harness {
    pub fn new(seed: &ClusterSeed, timeout: EvictionTimeout) -> Self {
        let sim = seed.build(0).unwrap();
        let nodes = sim.nodes().map(|n| n.id().to_owned()).collect();
        Self { sim, sched: Scheduler::new(timeout), nodes, raw_vfs: Vec::new(), redeploys: Vec::new() }
    }

    pub fn pump(&mut self, until: SimTime) {
        while let Some(ev) = self.sim.step(until) {
            match ev.event {
                Event::FailureObserved { node, .. } => {
                    self.sched.on_node_failure_observed(&mut self.sim, &node);
                }
                Event::Wake { actor: Actor::Scheduler, token } => {
                    self.sched.handle_wake(&mut self.sim, token);
                }
                Event::NodeReady { node, .. } => self.sched.on_node_recovered(&node),
                _ => {}
            }
        }
        self.sim.advance_to(until);
    }

    pub fn apply(&mut self, op: &Op) {
        let pick = |v: &[String], i: usize| v[i % v.len()].clone();
        match *op {
            Op::Place { pool, gpu, vfs, cores, ptp } => {
                let mut req = WorkloadRequirements::new("w", POOLS[pool]).cores(cores as u32);
                if gpu {
                    req = req.gpu(None);
                }
                if ptp {
                    req = req.ptp();
                }
                for _ in 0..vfs {
                    req = req.vf(VfRequest::untagged(9000));
                }
                if let Ok(p) = self.sched.place(&mut self.sim, req) {
                    let id = p.id;
                    let _ = self.sched.mark_running(&mut self.sim, id);
                }
            }
            Op::Terminate(i) => {
                let active: Vec<WorkloadId> = self.sched.placements().filter(|p| p.state.is_active()).map(|p| p.id).collect();
                if !active.is_empty() {
                    self.sched.terminate(&mut self.sim, active[i % active.len()]).unwrap();
                }
            }
            Op::Fail(i) => {
                let now = self.sim.now();
                let _ = self.sim.inject_failure(&pick(&self.nodes, i), now);
            }
            Op::Recover(i) => {
                let _ = self.sim.recover_node(&pick(&self.nodes, i));
            }
            Op::Advance(s) => {
                let t = self.sim.now() + SimTime::from_secs(s as u64);
                self.pump(t);
            }
            Op::Redeploy(i) => {
                let evicted: Vec<WorkloadId> = self
                    .sched
                    .placements()
                    .filter(|p| p.state == PlacementState::Evicted && !self.redeploys.iter().any(|(o, _)| *o == p.id))
                    .map(|p| p.id)
                    .collect();
                if !evicted.is_empty() {
                    let old = evicted[i % evicted.len()];
                    if let Ok(p) = self.sched.redeploy(&mut self.sim, old) {
                        let new = p.id;
                        self.redeploys.push((old, new));
                    }
                }
            }
            Op::Vf { node, release } => {
                if release && !self.raw_vfs.is_empty() {
                    let h = self.raw_vfs.remove(node % self.raw_vfs.len());
                    // the node may have been relabeled under the handle
                    let _ = self.sim.release_vf(&h);
                } else if let Ok(h) = self.sim.allocate_vf(&pick(&self.nodes, node), "nic0", VfRequest::untagged(1500), "raw") {
                    self.raw_vfs.push(h);
                }
            }
            Op::Relabel { node, pool } => {
                let id = pick(&self.nodes, node);
                if self.sim.node(&id).is_some_and(|n| n.is_ready()) {
                    self.sched.drain_node(&mut self.sim, &id);
                    for h in std::mem::take(&mut self.raw_vfs) {
                        if h.node == id {
                            let _ = self.sim.release_vf(&h);
                        } else {
                            self.raw_vfs.push(h);
                        }
                    }
                    let _ = self.sim.relabel_node(&id, POOLS[pool]);
                }
            }
        }
    }

    /// Independent ledger: every grant on every node is owned by exactly one
    /// active placement (or a raw VF handle), and no pool is overdrawn.
    pub fn check(&self) -> Result<(), String> {
        self.sim.audit()?;
        let mut vfs: BTreeSet<VfHandle> = self.raw_vfs.iter().cloned().collect();
        let mut cores: BTreeSet<(String, u32)> = BTreeSet::new();
        let mut gpus: BTreeSet<(String, u32, u32)> = BTreeSet::new();
        for p in self.sched.placements().filter(|p| p.state.is_active()) {
            vfs.extend(p.vfs.iter().cloned());
            cores.extend(p.cores.iter().map(|c| (p.node.clone(), c)));
            gpus.extend(p.gpu.map(|g| (p.node.clone(), g.gpu, g.slot)));
        }
        let mut held_vfs = BTreeSet::new();
        let mut held_cores = BTreeSet::new();
        let mut held_gpus = BTreeSet::new();
        for node in self.sim.nodes() {
            let id = node.id().to_owned();
            for nic in node.nics.values() {
                if nic.allocated.len() > 8 || nic.allocated.len() as u32 > nic.enabled {
                    return Err(format!("{id} holds {} VFs on {}", nic.allocated.len(), nic.nic));
                }
                held_vfs.extend(nic.allocated.keys().map(|i| VfHandle { node: id.clone(), nic: nic.nic.clone(), index: *i }));
            }
            let isolated = node.applied.as_ref().map_or(0, |b| b.isolated_cores());
            if node.core_grants.len() > isolated {
                return Err(format!("{id} granted {} of {isolated} isolated cores", node.core_grants.len()));
            }
            held_cores.extend(node.core_grants.keys().map(|c| (id.clone(), *c)));
            let parts = node.applied.as_ref().map_or(0, |b| b.gpu_partitions.max(1) as usize);
            for (g, slots) in node.gpu_slots.iter().enumerate() {
                if slots.len() > parts {
                    return Err(format!("{id} GPU {g} has {} partitions, pool allows {parts}", slots.len()));
                }
                held_gpus.extend(slots.iter().enumerate().filter(|(_, o)| o.is_some()).map(|(s, _)| (id.clone(), g as u32, s as u32)));
            }
        }
        if held_vfs != vfs {
            return Err(format!("VF ledger mismatch: held {held_vfs:?}, owned {vfs:?}"));
        }
        if held_cores != cores {
            return Err("core ledger mismatch".into());
        }
        if held_gpus != gpus {
            return Err("GPU ledger mismatch".into());
        }
        for (old, new) in &self.redeploys {
            let (o, n) = (self.sched.get(*old).unwrap(), self.sched.get(*new).unwrap());
            if o.pool != n.pool {
                return Err(format!("placement {old} moved from {} to {}", o.pool, n.pool));
            }
        }
        Ok(())
    }
}

pub type FailureScript = (Vec<(usize, bool, u8, u8)>, Vec<(usize, u16)>, u16);

pub fn failure_script() -> impl Strategy<Value = FailureScript> {
    (
        proptest::collection::vec((2..POOLS.len(), any::<bool>(), 0u8..3, 0u8..12), 1..8),
        proptest::collection::vec((any::<usize>(), 0u16..400), 1..4),
        0u16..120,
    )
}

/// Runs an operation script, checking the ledger after every step.
pub fn run_ops(ops: &[Op]) -> Result<(), String> {
    let seed = ClusterSeed::bundled();
    let mut h = Harness::new(&seed, EvictionTimeout::After(SimTime::from_secs(30)));
    for (i, op) in ops.iter().enumerate() {
        h.apply(op);
        h.check().map_err(|e| format!("after op {i} {op:?}: {e}"))?;
    }
    Ok(())
}

/// Loads a cluster, fails nodes, lets timeouts fire and redeploys; every
/// workload must stay inside its original pool.
pub fn run_failure_script(seed: &ClusterSeed, (loads, failures, timeout): &FailureScript) -> Result<(), String> {
    let mut h = Harness::new(seed, EvictionTimeout::After(SimTime::from_secs(*timeout as u64)));
    for &(pool, gpu, vfs, cores) in loads {
        h.apply(&Op::Place { pool, gpu, vfs, cores, ptp: false });
    }
    for &(node, at) in failures {
        let id = h.nodes[node % h.nodes.len()].clone();
        let _ = h.sim.inject_failure(&id, SimTime::from_secs(at as u64));
    }
    let mut t = SimTime::ZERO;
    for _ in 0..6 {
        t = t + SimTime::from_secs(200);
        h.pump(t);
        for i in 0..8 {
            h.apply(&Op::Redeploy(i));
        }
    }
    h.check()?;
    h.sched.audit(&h.sim)?;
    let pools: BTreeMap<WorkloadId, &str> = h.sched.placements().map(|p| (p.id, p.pool.as_str())).collect();
    for p in h.sched.placements() {
        let on = h.sim.node(&p.node).map(|n| n.pool.as_str()).filter(|_| p.state.is_active()).unwrap_or(&p.pool);
        if on != p.pool {
            return Err(format!("placement {} runs in {on}, belongs to {}", p.id, p.pool));
        }
        if let Some(orig) = p.replaces {
            if pools[&orig] != p.pool {
                return Err(format!("placement {} replaced {orig} across pools", p.id));
            }
        }
    }
    Ok(())
}

/// Fills one NIC, checks the ninth request fails and that a freed index is
/// reused.
pub fn ninth_vf_fails(seed: &ClusterSeed, node: &str) -> Result<(), String> {
    let mut sim = seed.build(0).map_err(|e| e.to_string())?;
    let mut handles = Vec::new();
    for i in 0..8 {
        handles.push(sim.allocate_vf(node, "nic0", VfRequest::tagged(100 + i, 9000), "t").map_err(|e| format!("VF {i}: {e}"))?);
    }
    if sim.allocate_vf(node, "nic0", VfRequest::untagged(9000), "t").is_ok() {
        return Err(format!("ninth VF on {node} was granted"));
    }
    sim.release_vf(&handles[3]).map_err(|e| e.to_string())?;
    let again = sim.allocate_vf(node, "nic0", VfRequest::untagged(9000), "t").map_err(|e| e.to_string())?;
    if again.index != 3 {
        return Err(format!("freed index 3 not reused, got {}", again.index));
    }
    if sim.allocate_vf(node, "nic0", VfRequest::untagged(9000), "t").is_ok() {
        return Err(format!("ninth VF on {node} was granted after reuse"));
    }
    sim.audit()
}
