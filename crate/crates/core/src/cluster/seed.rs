use serde::{Deserialize, Serialize};

use super::node::NodeSpec;
use super::profile::ProfileBundle;
use super::sim::{ClusterSim, SimConfig};
use super::ClusterError;
use crate::time::SimTime;

/// Bundled testbed: control plane, GH200, Gigabyte, Microway and edge pools.
pub const SEED_CLUSTER: &str = include_str!("../../assets/cluster.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedNode {
    pub pool: String,
    pub spec: NodeSpec,
}

/// Cluster seed file. Listed nodes start out ready with their pool's
/// profiles applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSeed {
    #[serde(default = "default_detection_delay")]
    pub detection_delay_s: f64,
    pub pools: Vec<ProfileBundle>,
    #[serde(default)]
    pub nodes: Vec<SeedNode>,
}

fn default_detection_delay() -> f64 {
    40.0
}

impl ClusterSeed {
    pub fn bundled() -> Self {
        Self::from_json(SEED_CLUSTER).expect("bundled cluster seed is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, ClusterError> {
        serde_json::from_str(text).map_err(|e| ClusterError::Seed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("seed serializes")
    }

    pub fn build(&self, seed: u64) -> Result<ClusterSim, ClusterError> {
        let mut sim = ClusterSim::new(SimConfig { detection_delay: SimTime::from_secs_f64(self.detection_delay_s), seed });
        for pool in &self.pools {
            sim.register_pool(pool.clone());
        }
        for n in &self.nodes {
            sim.add_provisioned_node(n.spec.clone(), &n.pool)?;
        }
        Ok(sim)
    }
}

impl ClusterSim {
    /// The bundled testbed.
    pub fn seeded(seed: u64) -> Self {
        ClusterSeed::bundled().build(seed).expect("bundled cluster seed builds")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::NodeState;

    #[test]
    fn bundled_seed_is_ready_at_zero() {
        let sim = ClusterSim::seeded(1);
        assert!(sim.nodes().count() >= 8);
        assert!(sim.nodes().all(|n| n.state == NodeState::Ready));
        sim.audit().unwrap();
        let gh = sim.node("gh200-1").unwrap();
        assert_eq!(gh.free_isolated_cores().len(), 61);
        assert_eq!(gh.nics["nic0"].enabled, 8);
    }

    #[test]
    fn seed_round_trips() {
        let seed = ClusterSeed::bundled();
        assert_eq!(ClusterSeed::from_json(&seed.to_json()).unwrap(), seed);
    }
}
