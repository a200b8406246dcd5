use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::timing::TimingModel;
use crate::cluster::ClusterSim;
use crate::time::SimTime;

/// (name, tag, pool). Images are built per pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ImageKey {
    pub name: String,
    pub tag: String,
    pub pool: String,
}

impl ImageKey {
    pub fn new(name: &str, tag: &str, pool: &str) -> Self {
        Self { name: name.into(), tag: tag.into(), pool: pool.into() }
    }

    /// Parses "name:tag" for `pool`.
    pub fn parse(reference: &str, pool: &str) -> Option<Self> {
        let (name, tag) = reference.split_once(':')?;
        (!name.is_empty() && !tag.is_empty()).then(|| Self::new(name, tag, pool))
    }
}

impl fmt::Display for ImageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.name, self.tag, self.pool)
    }
}

/// One element of a build chain; `parent` is "name:tag" in the same pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainImage {
    pub name: String,
    pub tag: String,
    pub parent: Option<String>,
    /// Full image size including parent layers.
    pub size_gb: f64,
    pub layers: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDescriptor {
    pub key: ImageKey,
    pub parent: Option<ImageKey>,
    pub size_gb: f64,
    pub layers: u32,
    /// Node the image was built on.
    pub built_on: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistryError {
    #[error("parent image `{parent}` of `{image}` is not in the registry")]
    MissingParent { image: String, parent: String },
    #[error("pool `{0}` has no ready node to build on")]
    NoPoolNode(String),
    #[error("image {image} was built for pool `{image_pool}`, node `{node}` is in `{node_pool}`")]
    WrongPool { image: String, image_pool: String, node: String, node_pool: String },
    #[error("unknown image {0}")]
    UnknownImage(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildReport {
    pub pool: String,
    pub node: String,
    pub built: Vec<ImageKey>,
    pub reused: Vec<ImageKey>,
    /// Build time charged on `node`.
    pub duration: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PullOutcome {
    pub duration: SimTime,
    pub cold: bool,
}

/// Images per (name, tag, pool) plus each node's local cache.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    images: BTreeMap<ImageKey, ImageDescriptor>,
    caches: BTreeMap<String, BTreeSet<ImageKey>>,
    cold_pulls: u64,
}

impl Registry {
    pub fn get(&self, key: &ImageKey) -> Option<&ImageDescriptor> {
        self.images.get(key)
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageDescriptor> {
        self.images.values()
    }

    pub fn is_cached(&self, node: &str, key: &ImageKey) -> bool {
        self.caches.get(node).is_some_and(|c| c.contains(key))
    }

    pub fn cold_pulls(&self) -> u64 {
        self.cold_pulls
    }

    /// Builds a chain for `pool` on its first ready node. Images already in
    /// the registry are reused, so a new leaf tag only rebuilds the leaf.
    pub fn build_image_chain(&mut self, chain: &[ChainImage], pool: &str, sim: &ClusterSim, timing: &TimingModel) -> Result<BuildReport, RegistryError> {
        let node = sim
            .nodes_in_pool(pool)
            .find(|n| n.is_ready())
            .map(|n| n.id().to_owned())
            .ok_or_else(|| RegistryError::NoPoolNode(pool.to_owned()))?;
        let mut staged: BTreeMap<ImageKey, ImageDescriptor> = BTreeMap::new();
        let mut built = Vec::new();
        let mut reused = Vec::new();
        let mut secs = 0.0;
        for img in chain {
            let key = ImageKey::new(&img.name, &img.tag, pool);
            let parent = match &img.parent {
                Some(p) => {
                    let pk = ImageKey::parse(p, pool).ok_or_else(|| RegistryError::MissingParent { image: key.to_string(), parent: p.clone() })?;
                    if !self.images.contains_key(&pk) && !staged.contains_key(&pk) {
                        return Err(RegistryError::MissingParent { image: key.to_string(), parent: pk.to_string() });
                    }
                    Some(pk)
                }
                None => None,
            };
            if self.images.contains_key(&key) || staged.contains_key(&key) {
                reused.push(key);
                continue;
            }
            let parent_size = parent.as_ref().and_then(|p| self.images.get(p).or_else(|| staged.get(p))).map_or(0.0, |d| d.size_gb);
            secs += timing.build_base_s + timing.build_s_per_gb * (img.size_gb - parent_size).max(0.0);
            staged.insert(key.clone(), ImageDescriptor { key: key.clone(), parent, size_gb: img.size_gb, layers: img.layers, built_on: node.clone() });
            built.push(key);
        }
        self.images.extend(staged);
        // the build node keeps what it built
        self.caches.entry(node.clone()).or_default().extend(built.iter().cloned());
        Ok(BuildReport { pool: pool.to_owned(), node, built, reused, duration: SimTime::from_secs_f64(secs) })
    }

    /// Cold pulls cost transfer time plus jittered per-layer overhead; warm
    /// pulls cost the fixed cache hit time.
    pub fn pull_image<R: Rng>(&mut self, sim: &ClusterSim, node: &str, key: &ImageKey, timing: &TimingModel, rng: &mut R) -> Result<PullOutcome, RegistryError> {
        let n = sim.node(node).ok_or_else(|| RegistryError::UnknownNode(node.to_owned()))?;
        if key.pool != n.pool {
            return Err(RegistryError::WrongPool { image: key.to_string(), image_pool: key.pool.clone(), node: node.to_owned(), node_pool: n.pool.clone() });
        }
        let desc = self.images.get(key).ok_or_else(|| RegistryError::UnknownImage(key.to_string()))?;
        let cache = self.caches.entry(node.to_owned()).or_default();
        if cache.contains(key) {
            return Ok(PullOutcome { duration: SimTime::from_millis(timing.warm_pull_ms), cold: false });
        }
        let overhead = timing.jittered(desc.layers as f64 * timing.layer_overhead_s, rng);
        let duration = SimTime::from_secs_f64(timing.transfer_s(desc.size_gb)) + overhead;
        cache.insert(key.clone());
        self.cold_pulls += 1;
        Ok(PullOutcome { duration, cold: true })
    }

    /// Marks an image as present on a node without charging a pull.
    pub fn warm(&mut self, node: &str, key: &ImageKey) {
        if self.images.contains_key(key) {
            self.caches.entry(node.to_owned()).or_default().insert(key.clone());
        }
    }

    pub fn evict_cache(&mut self, node: &str) {
        self.caches.remove(node);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Vec<ChainImage> {
        TimingModel::default().image_chains[0].images.clone()
    }

    #[test]
    fn chained_build_and_leaf_rebuild() {
        let sim = ClusterSim::seeded(0);
        let t = TimingModel::default();
        let mut reg = Registry::default();
        let first = reg.build_image_chain(&chain()[..2], "worker-gh", &sim, &t).unwrap();
        assert_eq!(first.built.len(), 2);
        assert_eq!(reg.get(&ImageKey::new("cubb", "24-1", "worker-gh")).unwrap().parent, Some(ImageKey::new("ran-deps", "v1", "worker-gh")));
        let mut leaf = chain()[1].clone();
        leaf.tag = "24-2".into();
        let again = reg.build_image_chain(&[chain()[0].clone(), leaf], "worker-gh", &sim, &t).unwrap();
        assert_eq!(again.built.len(), 1);
        assert_eq!(again.reused.len(), 1);
        assert!(again.duration < first.duration);
    }

    #[test]
    fn build_errors() {
        let sim = ClusterSim::seeded(0);
        let t = TimingModel::default();
        let mut reg = Registry::default();
        assert!(matches!(reg.build_image_chain(&chain()[1..2], "worker-gh", &sim, &t), Err(RegistryError::MissingParent { .. })));
        let mut empty = ClusterSim::new(Default::default());
        empty.register_pool(crate::cluster::ProfileBundle::bare("p"));
        assert!(matches!(reg.build_image_chain(&chain(), "p", &empty, &t), Err(RegistryError::NoPoolNode(_))));
    }

    #[test]
    fn cold_then_warm_pull_and_pool_gate() {
        let sim = ClusterSim::seeded(0);
        let t = TimingModel::default();
        let mut reg = Registry::default();
        reg.build_image_chain(&chain(), "worker-gh", &sim, &t).unwrap();
        let key = ImageKey::new("cubb", "24-1", "worker-gh");
        let mut rng = crate::rng::stream(7, &[]);
        let cold = reg.pull_image(&sim, "gh200-2", &key, &t, &mut rng).unwrap();
        assert!(cold.cold);
        let s = cold.duration.as_secs_f64();
        assert!((32.0..=45.0).contains(&s), "{s}");
        let warm = reg.pull_image(&sim, "gh200-2", &key, &t, &mut rng).unwrap();
        assert!(!warm.cold && warm.duration.as_secs_f64() < 0.1);
        assert!(matches!(reg.pull_image(&sim, "gigabyte-1", &key, &t, &mut rng), Err(RegistryError::WrongPool { .. })));
        let missing = ImageKey::new("nope", "1", "worker-gh");
        assert!(matches!(reg.pull_image(&sim, "gh200-2", &missing, &t, &mut rng), Err(RegistryError::UnknownImage(_))));
    }
}
