use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::deployment::NetworkScenario;
use super::inventory::RuInventory;
use crate::catalog::{Catalog, CatalogError, Fronthaul, Role, ValidationReport};
use crate::cluster::{ClusterSim, VfHandle, VfRequest};
use crate::scheduler::{SchedError, Scheduler, WorkloadId, WorkloadRequirements};

/// Deployment family of a gNB, which drives placement and timing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StackKind {
    /// OAI L2 with the GPU-accelerated L1.
    Arc,
    /// Monolithic OAI over the 7.2 fronthaul.
    Oai72,
    OaiSdr,
    SrsranSdr,
}

impl StackKind {
    pub const ALL: [StackKind; 4] = [StackKind::Arc, StackKind::Oai72, StackKind::OaiSdr, StackKind::SrsranSdr];

    pub fn as_str(self) -> &'static str {
        match self {
            StackKind::Arc => "arc",
            StackKind::Oai72 => "oai72",
            StackKind::OaiSdr => "oai-sdr",
            StackKind::SrsranSdr => "srsran-sdr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// 7.2-split stacks need a PTP-locked node and reset the RU on redeploy.
    pub fn uses_split72(self) -> bool {
        matches!(self, StackKind::Arc | StackKind::Oai72)
    }
}

impl fmt::Display for StackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classifies a scenario whose names all resolve in `catalog`.
pub fn classify_stack(catalog: &Catalog, scenario: &NetworkScenario) -> Result<StackKind, CatalogError> {
    let du_low = catalog.resolve(Role::DuLow, &scenario.du_low.name)?;
    let ru = catalog.resolve(Role::Ru, &scenario.ru.name)?;
    Ok(if du_low.requires_accelerator {
        StackKind::Arc
    } else if ru.fronthaul == Some(Fronthaul::Sdr) {
        if scenario.cu.name == "srsran" {
            StackKind::SrsranSdr
        } else {
            StackKind::OaiSdr
        }
    } else {
        StackKind::Oai72
    })
}

/// Resource shape and candidate pools for one stack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackPlacement {
    /// Tried in order.
    pub pools: Vec<String>,
    pub vf_requests: Vec<VfRequest>,
    pub isolated_cores: u32,
    #[serde(default)]
    pub needs_gpu: bool,
    #[serde(default)]
    pub gpu_model: Option<String>,
    #[serde(default)]
    pub needs_ptp_lock: bool,
    /// RUs that also need a backhaul VF on the same NIC.
    #[serde(default)]
    pub backhaul_vf_for: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PlacementPolicy {
    pub stacks: BTreeMap<StackKind, StackPlacement>,
}

impl Default for PlacementPolicy {
    fn default() -> Self {
        let pools = |p: &[&str]| p.iter().map(|s| s.to_string()).collect();
        let mut stacks = BTreeMap::new();
        stacks.insert(
            StackKind::Arc,
            StackPlacement {
                pools: pools(&["worker-gh", "worker-gb"]),
                // the accelerated L1 tags the fronthaul itself
                vf_requests: vec![VfRequest::untagged(9216)],
                isolated_cores: 16,
                needs_gpu: true,
                gpu_model: None,
                needs_ptp_lock: true,
                backhaul_vf_for: vec!["rusim".into()],
            },
        );
        stacks.insert(
            StackKind::Oai72,
            StackPlacement {
                pools: pools(&["worker-gb", "worker-gh"]),
                // control plane and user plane on separate tagged VFs
                vf_requests: vec![VfRequest::tagged(2, 9216), VfRequest::tagged(3, 9216)],
                isolated_cores: 8,
                needs_gpu: false,
                gpu_model: None,
                needs_ptp_lock: true,
                backhaul_vf_for: vec!["rusim".into()],
            },
        );
        let sdr = StackPlacement {
            pools: pools(&["worker-mw"]),
            vf_requests: vec![VfRequest::untagged(9000)],
            isolated_cores: 6,
            needs_gpu: false,
            gpu_model: None,
            needs_ptp_lock: false,
            backhaul_vf_for: Vec::new(),
        };
        stacks.insert(StackKind::OaiSdr, sdr.clone());
        stacks.insert(StackKind::SrsranSdr, sdr);
        Self { stacks }
    }
}

impl PlacementPolicy {
    pub fn requirements(&self, stack: StackKind, scenario: &NetworkScenario) -> Option<(Vec<String>, WorkloadRequirements)> {
        let p = self.stacks.get(&stack)?;
        let mut req = WorkloadRequirements::new(format!("gnb-{}", scenario.id), p.pools.first().cloned().unwrap_or_default())
            .namespace(format!("ran-{}", scenario.id))
            .cores(p.isolated_cores);
        req.vf_requests = p.vf_requests.clone();
        if p.backhaul_vf_for.contains(&scenario.ru.name) {
            let mtu = p.vf_requests.first().map_or(9000, |r| r.mtu);
            req.vf_requests.push(VfRequest::untagged(mtu));
        }
        if p.needs_gpu {
            req = req.gpu(p.gpu_model.as_deref());
        }
        if p.needs_ptp_lock {
            req = req.ptp();
        }
        Some((p.pools.clone(), req))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PodLayoutKind {
    SinglePodTwoContainers,
    SinglePodSingleContainer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PodLayout {
    pub kind: PodLayoutKind,
    pub containers: Vec<String>,
}

impl PodLayout {
    fn for_stack(stack: StackKind, scenario: &NetworkScenario) -> Self {
        match stack {
            StackKind::Arc => PodLayout {
                kind: PodLayoutKind::SinglePodTwoContainers,
                containers: vec![format!("l2-{}", scenario.du_high.name), format!("l1-{}", scenario.du_low.name)],
            },
            _ => PodLayout { kind: PodLayoutKind::SinglePodSingleContainer, containers: vec![format!("gnb-{}", scenario.cu.name)] },
        }
    }
}

/// A scenario bound to a node, its VFs and the RU's MAC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDeployment {
    #[serde(serialize_with = "scenario_value")]
    pub scenario: NetworkScenario,
    pub stack: StackKind,
    pub ru_mac: String,
    pub target_node: String,
    pub pool: String,
    pub workload: WorkloadId,
    pub vf_grants: Vec<VfHandle>,
    pub pod_layout: PodLayout,
}

fn scenario_value<S: serde::Serializer>(s: &NetworkScenario, ser: S) -> Result<S::Ok, S::Error> {
    s.to_value().serialize(ser)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("scenario is not deployable: {}", .0.message)]
    Invalid(ValidationReport),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("RU `{name}` at location {location:?} is not in the RU inventory")]
    UnknownRu { name: String, location: Option<i64> },
    #[error("no feasible node for {stack}: {detail}")]
    NoFeasibleNode { stack: StackKind, detail: String },
    #[error("virtual functions exhausted for {stack}: {detail}")]
    VfExhausted { stack: StackKind, detail: String },
    #[error("no placement rule for stack {0}")]
    NoPolicy(StackKind),
}

/// Validates, resolves the RU MAC, and places the gNB pod through the
/// scheduler, trying the stack's pools in order.
pub fn specialize_deployment(
    catalog: &Catalog,
    inventory: &RuInventory,
    policy: &PlacementPolicy,
    scenario: &NetworkScenario,
    sim: &mut ClusterSim,
    scheduler: &mut Scheduler,
) -> Result<ResolvedDeployment, ResolveError> {
    let report = catalog.validate(&scenario.selection())?;
    if !report.is_valid() {
        return Err(ResolveError::Invalid(report));
    }
    let ru_mac = inventory
        .mac_for(&scenario.ru.name, scenario.ru.location)
        .ok_or_else(|| ResolveError::UnknownRu { name: scenario.ru.name.clone(), location: scenario.ru.location })?
        .to_owned();
    let stack = classify_stack(catalog, scenario)?;
    let (pools, base) = policy.requirements(stack, scenario).ok_or(ResolveError::NoPolicy(stack))?;
    let mut failures = Vec::new();
    for pool in &pools {
        let mut req = base.clone();
        req.pool_selector = pool.clone();
        match scheduler.place(sim, req) {
            Ok(p) => {
                return Ok(ResolvedDeployment {
                    scenario: scenario.clone(),
                    stack,
                    ru_mac,
                    target_node: p.node.clone(),
                    pool: p.pool.clone(),
                    workload: p.id,
                    vf_grants: p.vfs.clone(),
                    pod_layout: PodLayout::for_stack(stack, scenario),
                })
            }
            Err(e) => failures.push(e),
        }
    }
    let vf_only = !failures.is_empty() && failures.iter().all(SchedError::is_vf_exhaustion);
    let detail = failures.iter().map(ToString::to_string).collect::<Vec<_>>().join(" | ");
    let detail = if detail.is_empty() { "no candidate pools".to_owned() } else { detail };
    Err(if vf_only { ResolveError::VfExhausted { stack, detail } } else { ResolveError::NoFeasibleNode { stack, detail } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{ClusterSeed, SimConfig};
    use crate::config::parse_deployment_file;

    fn scenario(file: &str) -> NetworkScenario {
        parse_deployment_file(file, &Catalog::seeded()).unwrap()
    }

    const LISTING: &str = include_str!("../../tests/fixtures/deployment.json");
    const OAI72: &str = include_str!("../../tests/fixtures/deployment_oai72.json");
    const SDR: &str = include_str!("../../tests/fixtures/deployment_srsran_usrp.json");

    fn go(s: &NetworkScenario, sim: &mut ClusterSim, sched: &mut Scheduler) -> Result<ResolvedDeployment, ResolveError> {
        specialize_deployment(&Catalog::seeded(), &RuInventory::seeded(), &PlacementPolicy::default(), s, sim, sched)
    }

    #[test]
    fn listing_scenario_gets_two_container_pod_and_one_untagged_vf() {
        let mut sim = ClusterSim::seeded(0);
        let mut sched = Scheduler::default();
        let r = go(&scenario(LISTING), &mut sim, &mut sched).unwrap();
        assert_eq!(r.stack, StackKind::Arc);
        assert_eq!(r.pod_layout.kind, PodLayoutKind::SinglePodTwoContainers);
        assert_eq!(r.vf_grants.len(), 1);
        let vf = &r.vf_grants[0];
        assert_eq!(sim.node(&vf.node).unwrap().nics[&vf.nic].allocated[&vf.index].vlan, None);
        assert_eq!(r.target_node, "gh200-1");
        assert_eq!(r.ru_mac, "e8:c7:4f:25:81:0c");
    }

    #[test]
    fn oai72_gets_two_tagged_vfs_single_container() {
        let mut sim = ClusterSim::seeded(0);
        let mut sched = Scheduler::default();
        let r = go(&scenario(OAI72), &mut sim, &mut sched).unwrap();
        assert_eq!(r.stack, StackKind::Oai72);
        assert_eq!(r.pod_layout.kind, PodLayoutKind::SinglePodSingleContainer);
        assert_eq!(r.vf_grants.len(), 2);
        let node = sim.node(&r.target_node).unwrap();
        let tags: Vec<_> = r.vf_grants.iter().map(|v| node.nics[&v.nic].allocated[&v.index].vlan).collect();
        assert!(tags.iter().all(Option::is_some));
        assert_eq!(node.spec.family(), "gigabyte");
    }

    #[test]
    fn sdr_goes_to_microway() {
        let mut sim = ClusterSim::seeded(0);
        let mut sched = Scheduler::default();
        let r = go(&scenario(SDR), &mut sim, &mut sched).unwrap();
        assert_eq!(r.stack, StackKind::SrsranSdr);
        assert!(r.target_node.starts_with("microway"));
    }

    #[test]
    fn empty_cluster_has_no_feasible_node() {
        let mut sim = ClusterSim::new(SimConfig::default());
        let mut sched = Scheduler::default();
        assert!(matches!(go(&scenario(LISTING), &mut sim, &mut sched), Err(ResolveError::NoFeasibleNode { .. })));
        let mut sim = ClusterSeed { nodes: vec![], ..ClusterSeed::bundled() }.build(0).unwrap();
        assert!(matches!(go(&scenario(LISTING), &mut sim, &mut sched), Err(ResolveError::NoFeasibleNode { .. })));
    }

    #[test]
    fn unknown_ru_location() {
        let mut s = scenario(LISTING);
        s.ru.location = Some(1);
        let mut sim = ClusterSim::seeded(0);
        assert!(matches!(go(&s, &mut sim, &mut Scheduler::default()), Err(ResolveError::UnknownRu { .. })));
    }

    #[test]
    fn exhausted_vfs_are_reported_as_such() {
        let mut sim = ClusterSim::seeded(0);
        let mut sched = Scheduler::default();
        for node in ["gigabyte-1", "gigabyte-2", "gh200-1", "gh200-2"] {
            for i in 0..8 {
                sim.allocate_vf(node, "nic0", VfRequest::untagged(1500), &format!("filler{i}")).unwrap();
            }
        }
        assert!(matches!(go(&scenario(OAI72), &mut sim, &mut sched), Err(ResolveError::VfExhausted { .. })));
    }
}
