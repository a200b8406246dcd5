use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::registry::{ImageKey, Registry, RegistryError};
use super::run::{DeploymentRecord, PipelineRun, RunKind, RunState, TaskOutcome, TaskRecord};
use super::timing::TimingModel;
use crate::catalog::Catalog;
use crate::cluster::{Actor, ClusterError, ClusterSim, Event, FiredEvent, NodeSpec, NodeState};
use crate::config::{
    parse_ue_database, specialize_deployment, NetworkScenario, PlacementPolicy, ResolveError, ResolvedDeployment, RuInventory, TestSpec,
    UeDatabase,
};
use crate::rng;
use crate::scheduler::{EvictionTimeout, PlacementState, SchedError, Scheduler, WorkloadId};
use crate::telemetry::{
    synthesize_performance, Direction, PerformanceModel, ProfileKey, RecordFilter, RegressionVerdict, SeriesSummary, Shaping, Store,
    TelemetryError, TestRecord, UeResult,
};
use crate::time::SimTime;

pub const SEED_UE_DATABASE: &str = include_str!("../../assets/ue_database.json");

/// Upper bound on events processed by one drive call; a guard against
/// runaway feedback between actors.
const MAX_EVENTS: usize = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrchestratorConfig {
    pub seed: u64,
    pub timing: TimingModel,
    pub performance: PerformanceModel,
    pub policy: PlacementPolicy,
    pub eviction_timeout: EvictionTimeout,
    /// Degradation threshold for baseline comparison.
    pub baseline_threshold: f64,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            timing: TimingModel::default(),
            performance: PerformanceModel::default(),
            policy: PlacementPolicy::default(),
            eviction_timeout: EvictionTimeout::Default,
            baseline_threshold: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Sched(#[from] SchedError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
    #[error("scenario {0} is not deployed")]
    UnknownScenario(u32),
    #[error("scenario {0} is already deployed")]
    AlreadyDeployed(u32),
    #[error("scenario {id} is {status:?}, not ready")]
    DeploymentNotReady { id: u32, status: DeploymentStatus },
    #[error("UE `{0}` is not in the UE database")]
    UnknownUe(String),
    #[error("{requested} UEs requested, {available} available")]
    NotEnoughUes { requested: usize, available: usize },
    #[error("{kind} pipeline {run} failed: {message}")]
    PipelineFailed { run: u64, kind: RunKind, message: String },
    #[error("simulation stalled with pipeline {0} unfinished")]
    Stalled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeploymentStatus {
    Deploying,
    Ready,
    /// Node failure observed; waiting for eviction.
    Disrupted,
    Redeploying,
    TearingDown,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deployment {
    #[serde(serialize_with = "scenario_value")]
    pub scenario: NetworkScenario,
    pub resolved: ResolvedDeployment,
    pub status: DeploymentStatus,
    pub record: Option<DeploymentRecord>,
    pub attached_ues: BTreeSet<String>,
    pub tests_run: u64,
    /// 7.2-split RU resets caused by redeployments (new DU MAC).
    pub ru_resets: u32,
    pub redeploy_runs: Vec<u64>,
}

fn scenario_value<S: serde::Serializer>(s: &NetworkScenario, ser: S) -> Result<S::Ok, S::Error> {
    s.to_value().serialize(ser)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimelineKind {
    NodeFailed,
    FailureObserved,
    Evicted,
    Redeployed,
    RedeployFailed,
    RuReset,
    GnbReady,
    TrafficResumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub time: SimTime,
    pub kind: TimelineKind,
    pub node: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_id: Option<u32>,
}

/// Failure-to-recovery milestones for one node failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResilienceTimeline {
    pub node: String,
    pub failed_at: SimTime,
    pub observed_at: Option<SimTime>,
    pub evicted_at: Option<SimTime>,
    pub scenario_id: Option<u32>,
    pub redeployed_to: Option<String>,
    pub gnb_ready_at: Option<SimTime>,
    pub traffic_resumed_at: Option<SimTime>,
}

impl ResilienceTimeline {
    /// Seconds after the failure, for each milestone that happened.
    pub fn offsets(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        let rel = |t: SimTime| t.saturating_sub(self.failed_at).as_secs_f64();
        m.insert("failed", 0.0);
        for (k, t) in [
            ("observed", self.observed_at),
            ("evicted", self.evicted_at),
            ("gnb_ready", self.gnb_ready_at),
            ("traffic_resumed", self.traffic_resumed_at),
        ] {
            if let Some(t) = t {
                m.insert(k, rel(t));
            }
        }
        m
    }
}

/// A completed test run with its persisted record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub run: PipelineRun,
    pub record: TestRecord,
    pub verdict: Option<RegressionVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    TestSpecification,
    ImagePull,
    GnbSetup,
    UeConnection,
    DataCollection,
    UeReattach,
    ActivateUes,
    GenerateTraffic,
    CollectResults,
    Persist,
    Teardown,
}

impl Step {
    fn name(self) -> &'static str {
        match self {
            Step::TestSpecification => "test_specification",
            Step::ImagePull => "image_pull",
            Step::GnbSetup => "gnb_setup",
            Step::UeConnection => "ue_connection",
            Step::DataCollection => "data_collection",
            Step::UeReattach => "ue_reattach",
            Step::ActivateUes => "activate_ues",
            Step::GenerateTraffic => "generate_traffic",
            Step::CollectResults => "collect_results",
            Step::Persist => "persist",
            Step::Teardown => "teardown",
        }
    }

    fn plan(kind: RunKind) -> &'static [Step] {
        match kind {
            RunKind::Deploy => &[Step::TestSpecification, Step::GnbSetup, Step::UeConnection, Step::DataCollection],
            RunKind::Redeploy => &[Step::ImagePull, Step::GnbSetup, Step::UeReattach],
            RunKind::Test => &[Step::ActivateUes, Step::GenerateTraffic, Step::CollectResults, Step::Persist],
            RunKind::Teardown => &[Step::Teardown],
        }
    }

    /// Steps that need the gNB placement alive when they complete.
    fn needs_workload(self) -> bool {
        !matches!(self, Step::Teardown | Step::Persist | Step::TestSpecification | Step::ImagePull)
    }
}

#[derive(Debug, Clone)]
struct TestContext {
    spec: TestSpec,
    ues: Vec<(String, String)>,
    seq: u64,
    traffic: Option<(SimTime, SimTime)>,
}

#[derive(Debug, Clone)]
struct ActiveRun {
    kind: RunKind,
    scenario_id: u32,
    workload: Option<WorkloadId>,
    step: usize,
    step_start: SimTime,
    step_end: SimTime,
    step_outcome: TaskOutcome,
    step_detail: String,
    test: Option<TestContext>,
}

/// Owns the simulation and drives deployment, redeployment, test and
/// teardown pipelines over it. Pipelines advance on simulation wake-ups, so
/// several runs interleave with each other and with cluster events.
pub struct Orchestrator {
    pub sim: ClusterSim,
    pub scheduler: Scheduler,
    pub registry: Registry,
    pub catalog: Catalog,
    pub inventory: RuInventory,
    pub ue_db: UeDatabase,
    pub store: Store,
    cfg: OrchestratorConfig,
    deployments: BTreeMap<u32, Deployment>,
    runs: BTreeMap<u64, PipelineRun>,
    active: BTreeMap<u64, ActiveRun>,
    next_run: u64,
    timeline: Vec<TimelineEntry>,
    test_outcomes: BTreeMap<u64, TestOutcome>,
}

impl Orchestrator {
    pub fn new(cfg: OrchestratorConfig, sim: ClusterSim, catalog: Catalog, inventory: RuInventory, ue_db: UeDatabase, store: Store) -> Self {
        let scheduler = Scheduler::new(cfg.eviction_timeout);
        let mut o = Self {
            sim,
            scheduler,
            registry: Registry::default(),
            catalog,
            inventory,
            ue_db,
            store,
            cfg,
            deployments: BTreeMap::new(),
            runs: BTreeMap::new(),
            active: BTreeMap::new(),
            next_run: 1,
            timeline: Vec::new(),
            test_outcomes: BTreeMap::new(),
        };
        o.build_images();
        o
    }

    /// Bundled cluster, catalog, inventory and UE database; in-memory store.
    pub fn seeded(cfg: OrchestratorConfig) -> Self {
        let sim = ClusterSim::seeded(cfg.seed);
        let ue_db = parse_ue_database(SEED_UE_DATABASE).expect("bundled UE database is valid");
        Self::new(cfg, sim, Catalog::seeded(), RuInventory::seeded(), ue_db, Store::in_memory())
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.cfg
    }

    pub fn set_eviction_timeout(&mut self, t: EvictionTimeout) {
        self.cfg.eviction_timeout = t;
        self.scheduler.set_eviction_timeout(t);
    }

    fn build_images(&mut self) {
        let chains = self.cfg.timing.image_chains.clone();
        for chain in &chains {
            for pool in &chain.pools {
                match self.registry.build_image_chain(&chain.images, pool, &self.sim, &self.cfg.timing) {
                    Ok(report) => {
                        self.sim.log("images_built", json!({ "pool": pool, "node": report.node, "built": report.built.len(), "duration": report.duration }))
                    }
                    Err(e) => log::debug!("skipping image build for {pool}: {e}"),
                }
            }
        }
        if self.cfg.timing.prepull {
            let nodes: Vec<String> = self.sim.nodes().filter(|n| n.is_ready()).map(|n| n.id().to_owned()).collect();
            for n in nodes {
                self.prepull(&n);
            }
        }
    }

    fn prepull(&mut self, node: &str) {
        let Some(pool) = self.sim.node(node).map(|n| n.pool.clone()) else { return };
        let keys: Vec<ImageKey> = self.registry.images().filter(|d| d.key.pool == pool).map(|d| d.key.clone()).collect();
        for k in keys {
            self.registry.warm(node, &k);
        }
    }

    pub fn deployments(&self) -> impl Iterator<Item = &Deployment> {
        self.deployments.values()
    }

    pub fn deployment(&self, scenario_id: u32) -> Option<&Deployment> {
        self.deployments.get(&scenario_id)
    }

    pub fn runs(&self) -> impl Iterator<Item = &PipelineRun> {
        self.runs.values()
    }

    pub fn run(&self, id: u64) -> Option<&PipelineRun> {
        self.runs.get(&id)
    }

    pub fn is_active(&self, run: u64) -> bool {
        self.active.contains_key(&run)
    }

    pub fn timeline(&self) -> &[TimelineEntry] {
        &self.timeline
    }

    pub fn test_outcome(&self, run: u64) -> Option<&TestOutcome> {
        self.test_outcomes.get(&run)
    }

    /// Task records of every run as JSON lines.
    pub fn ledger_jsonl(&self) -> String {
        let mut out = String::new();
        for run in self.runs.values() {
            for t in &run.tasks {
                out.push_str(&serde_json::to_string(t).expect("task record serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn audit(&self) -> Result<(), String> {
        self.sim.audit()?;
        self.scheduler.audit(&self.sim)
    }

    // ---- driving the simulation ----

    /// Processes every event due up to `t`, then sets the clock to `t`.
    pub fn run_until(&mut self, t: SimTime) {
        let mut n = 0;
        while let Some(ev) = self.sim.step(t) {
            self.dispatch(ev);
            n += 1;
            if n >= MAX_EVENTS {
                log::warn!("event budget exhausted before {t}");
                return;
            }
        }
        self.sim.advance_to(t);
    }

    /// Processes events until the queue is empty.
    pub fn run_until_idle(&mut self) {
        for _ in 0..MAX_EVENTS {
            match self.sim.step(SimTime::from_millis(u64::MAX)) {
                Some(ev) => self.dispatch(ev),
                None => return,
            }
        }
        log::warn!("event budget exhausted");
    }

    /// Drives the simulation until `run` finishes.
    pub fn complete(&mut self, run: u64) -> Result<&PipelineRun, OrchestratorError> {
        for _ in 0..MAX_EVENTS {
            if !self.active.contains_key(&run) {
                break;
            }
            match self.sim.step(SimTime::from_millis(u64::MAX)) {
                Some(ev) => self.dispatch(ev),
                None => return Err(OrchestratorError::Stalled(run)),
            }
        }
        if self.active.contains_key(&run) {
            return Err(OrchestratorError::Stalled(run));
        }
        Ok(&self.runs[&run])
    }

    fn dispatch(&mut self, ev: FiredEvent) {
        match ev.event {
            Event::Wake { actor: Actor::Pipeline, token } => self.on_step_done(token),
            Event::Wake { actor: Actor::Scheduler, token } => {
                if let Some(evicted) = self.scheduler.handle_wake(&mut self.sim, token) {
                    self.on_evicted(evicted);
                }
            }
            Event::Wake { actor: Actor::Orchestrator, .. } => {}
            Event::NodeFailed { node } => {
                if self.sim.node(&node).is_some_and(|n| n.state == NodeState::Failed) {
                    for d in self.deployments.values_mut().filter(|d| d.resolved.target_node == node) {
                        d.attached_ues.clear();
                    }
                    self.push_timeline(TimelineKind::NodeFailed, &node, None);
                }
            }
            Event::FailureObserved { node, .. } => {
                self.push_timeline(TimelineKind::FailureObserved, &node, None);
                let timers = self.scheduler.on_node_failure_observed(&mut self.sim, &node);
                for t in timers {
                    if let Some(d) = self.deployments.values_mut().find(|d| d.resolved.workload == t.placement) {
                        d.status = DeploymentStatus::Disrupted;
                    }
                }
            }
            Event::NodeReady { node, .. } | Event::ReconfigDone { node, .. } => {
                if self.sim.node(&node).is_some_and(|n| n.is_ready()) {
                    self.scheduler.on_node_recovered(&node);
                    if self.cfg.timing.prepull {
                        self.prepull(&node);
                    }
                }
            }
            Event::PtpLocked { .. } => {}
        }
    }

    fn push_timeline(&mut self, kind: TimelineKind, node: &str, scenario_id: Option<u32>) {
        self.timeline.push(TimelineEntry { time: self.sim.now(), kind, node: node.to_owned(), scenario_id });
    }

    fn on_evicted(&mut self, workload: WorkloadId) {
        let Some(id) = self.deployments.values().find(|d| d.resolved.workload == workload).map(|d| d.scenario.id) else { return };
        let old_node = self.deployments[&id].resolved.target_node.clone();
        self.push_timeline(TimelineKind::Evicted, &old_node, Some(id));
        self.redeploy(id, workload);
    }

    /// Same-pool replacement of an evicted gNB, followed by the redeploy
    /// pipeline.
    fn redeploy(&mut self, id: u32, workload: WorkloadId) {
        match self.scheduler.redeploy(&mut self.sim, workload) {
            Ok(p) => {
                let (node, pool, vfs, new_id) = (p.node.clone(), p.pool.clone(), p.vfs.clone(), p.id);
                let d = self.deployments.get_mut(&id).expect("deployment exists");
                d.resolved.target_node = node.clone();
                d.resolved.pool = pool;
                d.resolved.vf_grants = vfs;
                d.resolved.workload = new_id;
                d.status = DeploymentStatus::Redeploying;
                d.attached_ues.clear();
                let split72 = d.resolved.stack.uses_split72();
                if split72 {
                    d.ru_resets += 1;
                }
                self.push_timeline(TimelineKind::Redeployed, &node, Some(id));
                if split72 {
                    self.push_timeline(TimelineKind::RuReset, &node, Some(id));
                }
                let run = self.start_run(RunKind::Redeploy, id, Some(new_id), None);
                self.deployments.get_mut(&id).expect("deployment exists").redeploy_runs.push(run);
            }
            Err(e) => {
                let node = self.deployments[&id].resolved.target_node.clone();
                self.sim.log("redeploy_failed", json!({ "scenario": id, "error": e.to_string() }));
                self.push_timeline(TimelineKind::RedeployFailed, &node, Some(id));
                self.deployments.get_mut(&id).expect("deployment exists").status = DeploymentStatus::Failed;
            }
        }
    }

    // ---- pipelines ----

    fn start_run(&mut self, kind: RunKind, scenario_id: u32, workload: Option<WorkloadId>, test: Option<TestContext>) -> u64 {
        let id = self.next_run;
        self.next_run += 1;
        let now = self.sim.now();
        self.runs.insert(
            id,
            PipelineRun {
                id,
                kind,
                scenario_id,
                planned: Step::plan(kind).iter().map(|s| s.name().to_owned()).collect(),
                tasks: Vec::new(),
                state: RunState::Running,
                started_at: now,
                ended_at: None,
                error: None,
            },
        );
        self.sim.log("pipeline_started", json!({ "run": id, "kind": kind, "scenario": scenario_id }));
        self.active.insert(
            id,
            ActiveRun {
                kind,
                scenario_id,
                workload,
                step: 0,
                step_start: now,
                step_end: now,
                step_outcome: TaskOutcome::Ok,
                step_detail: String::new(),
                test,
            },
        );
        self.start_step(id);
        id
    }

    fn task_rng(&self, run: u64, step: usize, what: &str) -> rand_chacha::ChaCha8Rng {
        rng::stream(self.cfg.seed, &[rng::label(what), run, step as u64])
    }

    fn start_step(&mut self, run: u64) {
        let a = self.active[&run].clone();
        let step = Step::plan(a.kind)[a.step];
        let now = self.sim.now();
        let mut rng = self.task_rng(run, a.step, step.name());
        let mut outcome = TaskOutcome::Ok;
        let mut detail = String::new();
        let timing = &self.cfg.timing;
        let result: Result<SimTime, String> = match step {
            Step::TestSpecification | Step::ImagePull => {
                let base = if step == Step::TestSpecification { timing.jittered(timing.base("test_specification"), &mut rng) } else { SimTime::ZERO };
                self.pull_stack_images(run, a.scenario_id).map(|(pull, cold)| {
                    detail = format!("pull {:.3}s ({cold} cold)", pull.as_secs_f64());
                    base + pull
                })
            }
            Step::GnbSetup => match self.deployments.get(&a.scenario_id) {
                Some(d) => {
                    let setup = timing.jittered(timing.gnb_setup_base(d.resolved.stack), &mut rng);
                    let limit = SimTime::from_secs_f64(timing.start_timeout_s);
                    if setup > limit {
                        outcome = TaskOutcome::Failed;
                        detail = format!("start timeout after {limit}");
                        Ok(limit)
                    } else {
                        Ok(setup)
                    }
                }
                None => Err("deployment vanished".into()),
            },
            Step::UeConnection => Ok(timing.jittered(timing.base("ue_connection"), &mut rng)),
            Step::DataCollection | Step::CollectResults => Ok(timing.jittered(timing.base("data_collection"), &mut rng)),
            Step::UeReattach => Ok(timing.jittered(timing.base("ue_reattach"), &mut rng)),
            Step::ActivateUes => {
                let ctx = a.test.as_ref().expect("test runs carry a context");
                let attached = self.deployments.get(&a.scenario_id).map(|d| &d.attached_ues);
                if attached.is_some_and(|set| ctx.ues.iter().all(|(s, _)| set.contains(s))) {
                    outcome = TaskOutcome::Skipped;
                    detail = "UEs already attached".into();
                    Ok(SimTime::ZERO)
                } else {
                    Ok(timing.jittered(timing.base("ue_connection"), &mut rng))
                }
            }
            Step::GenerateTraffic => {
                let secs = a.test.as_ref().map_or(0, |c| c.spec.duration_s());
                let d = SimTime::from_secs(secs as u64);
                if let Some(ctx) = self.active.get_mut(&run).and_then(|x| x.test.as_mut()) {
                    ctx.traffic = Some((now, now + d));
                }
                Ok(d)
            }
            Step::Persist => Ok(timing.jittered(timing.base("persist"), &mut rng)),
            Step::Teardown => Ok(timing.jittered(timing.base("teardown"), &mut rng)),
        };
        match result {
            Ok(d) => {
                let x = self.active.get_mut(&run).expect("active run");
                x.step_start = now;
                x.step_end = now + d;
                x.step_outcome = outcome;
                x.step_detail = detail;
                self.sim.schedule_wake(now + d, Actor::Pipeline, run);
            }
            Err(message) => {
                let x = self.active.get_mut(&run).expect("active run");
                x.step_start = now;
                x.step_end = now;
                x.step_outcome = TaskOutcome::Failed;
                x.step_detail = message.clone();
                self.finish_step(run);
            }
        }
    }

    fn pull_stack_images(&mut self, run: u64, scenario_id: u32) -> Result<(SimTime, usize), String> {
        let d = self.deployments.get(&scenario_id).ok_or("deployment vanished")?;
        let node = d.resolved.target_node.clone();
        let pool = d.resolved.pool.clone();
        let refs = self.cfg.timing.stack_images.get(&d.resolved.stack).cloned().unwrap_or_default();
        let mut total = SimTime::ZERO;
        let mut cold = 0;
        for (i, r) in refs.iter().enumerate() {
            let key = ImageKey::parse(r, &pool).ok_or_else(|| format!("bad image reference `{r}`"))?;
            let mut rng = rng::stream(self.cfg.seed, &[rng::label("pull"), run, i as u64]);
            let out = self.registry.pull_image(&self.sim, &node, &key, &self.cfg.timing, &mut rng).map_err(|e| e.to_string())?;
            total = total + out.duration;
            cold += out.cold as usize;
        }
        Ok((total, cold))
    }

    fn on_step_done(&mut self, run: u64) {
        let Some(a) = self.active.get(&run) else { return };
        if a.step_end != self.sim.now() {
            return;
        }
        self.finish_step(run);
    }

    /// Closes the current step, applies its effects and starts the next.
    fn finish_step(&mut self, run: u64) {
        let mut a = self.active[&run].clone();
        let step = Step::plan(a.kind)[a.step];
        let now = self.sim.now();
        if a.step_outcome != TaskOutcome::Failed && step.needs_workload() && !self.workload_alive(&a) {
            a.step_outcome = TaskOutcome::Failed;
            a.step_detail = "gNB workload lost".into();
        }
        let mut failure = (a.step_outcome == TaskOutcome::Failed).then(|| a.step_detail.clone());
        if failure.is_none() {
            if let Err(e) = self.apply_step(run, &a, step) {
                failure = Some(e);
            }
        }
        let outcome = if failure.is_some() { TaskOutcome::Failed } else { a.step_outcome };
        let detail = failure.clone().unwrap_or_else(|| a.step_detail.clone());
        let record = TaskRecord { run, pipeline: a.kind, scenario_id: a.scenario_id, task: step.name().into(), start: a.step_start, end: now, outcome, detail };
        self.sim.log("task_finished", json!({ "run": run, "task": step.name(), "outcome": outcome, "start": a.step_start, "end": now }));
        self.runs.get_mut(&run).expect("run exists").tasks.push(record);
        if let Some(message) = failure {
            self.fail_run(run, message);
            return;
        }
        let last = a.step + 1 == Step::plan(a.kind).len();
        if last {
            self.succeed_run(run);
        } else {
            self.active.get_mut(&run).expect("active run").step += 1;
            self.start_step(run);
        }
    }

    fn workload_alive(&self, a: &ActiveRun) -> bool {
        let Some(d) = self.deployments.get(&a.scenario_id) else { return false };
        let wl = a.workload.unwrap_or(d.resolved.workload);
        if wl != d.resolved.workload {
            return false;
        }
        let placement_ok = self.scheduler.get(wl).is_some_and(|p| matches!(p.state, PlacementState::Pending | PlacementState::Running));
        placement_ok && self.sim.node(&d.resolved.target_node).is_some_and(|n| n.is_ready())
    }

    fn apply_step(&mut self, run: u64, a: &ActiveRun, step: Step) -> Result<(), String> {
        let id = a.scenario_id;
        match step {
            Step::GnbSetup => {
                let wl = self.deployments[&id].resolved.workload;
                self.scheduler.mark_running(&mut self.sim, wl).map_err(|e| e.to_string())?;
                if a.kind == RunKind::Redeploy {
                    let node = self.deployments[&id].resolved.target_node.clone();
                    self.push_timeline(TimelineKind::GnbReady, &node, Some(id));
                }
            }
            Step::UeConnection | Step::UeReattach => {
                let ues = self.room_ues(id);
                let d = self.deployments.get_mut(&id).expect("checked alive");
                d.attached_ues = ues;
                d.status = DeploymentStatus::Ready;
                if a.kind == RunKind::Redeploy {
                    let node = d.resolved.target_node.clone();
                    self.push_timeline(TimelineKind::TrafficResumed, &node, Some(id));
                }
            }
            Step::ActivateUes => {
                let ctx = a.test.as_ref().expect("test context");
                let d = self.deployments.get_mut(&id).expect("checked alive");
                d.attached_ues.extend(ctx.ues.iter().map(|(s, _)| s.clone()));
            }
            Step::Persist => {
                let outcome = self.persist_test(run, a)?;
                self.test_outcomes.insert(run, outcome);
            }
            Step::Teardown => {
                if let Some(d) = self.deployments.remove(&id) {
                    let wl = d.resolved.workload;
                    if self.scheduler.get(wl).is_some_and(|p| p.state.is_active()) {
                        self.scheduler.terminate(&mut self.sim, wl).map_err(|e| e.to_string())?;
                    }
                }
            }
            Step::TestSpecification | Step::ImagePull | Step::DataCollection | Step::GenerateTraffic | Step::CollectResults => {}
        }
        Ok(())
    }

    fn succeed_run(&mut self, run: u64) {
        let a = self.active.remove(&run).expect("active run");
        let now = self.sim.now();
        let r = self.runs.get_mut(&run).expect("run exists");
        r.state = RunState::Succeeded;
        r.ended_at = Some(now);
        let r = r.clone();
        self.sim.log("pipeline_succeeded", json!({ "run": run, "total": r.total() }));
        if a.kind == RunKind::Deploy {
            if let Some(d) = self.deployments.get_mut(&a.scenario_id) {
                d.status = DeploymentStatus::Ready;
                d.record = Some(DeploymentRecord {
                    scenario_id: a.scenario_id,
                    stack: d.resolved.stack,
                    node: d.resolved.target_node.clone(),
                    pool: d.resolved.pool.clone(),
                    run,
                    resolved: d.resolved.clone(),
                    total_s: r.total().as_secs_f64(),
                    breakdown: r.breakdown(),
                    tasks: r.tasks.clone(),
                });
            }
        }
    }

    fn fail_run(&mut self, run: u64, message: String) {
        let a = self.active.remove(&run).expect("active run");
        let r = self.runs.get_mut(&run).expect("run exists");
        r.state = RunState::Failed;
        r.ended_at = Some(self.sim.now());
        r.error = Some(message.clone());
        self.sim.log("pipeline_failed", json!({ "run": run, "error": message }));
        if a.kind != RunKind::Deploy {
            return;
        }
        // A failed first deployment releases its resources; a deployment
        // that was already replaced by a redeploy is left alone.
        let owned = self.deployments.get(&a.scenario_id).is_some_and(|d| Some(d.resolved.workload) == a.workload);
        if owned {
            let d = self.deployments.remove(&a.scenario_id).expect("checked");
            if self.scheduler.get(d.resolved.workload).is_some_and(|p| p.state.is_active()) {
                let _ = self.scheduler.terminate(&mut self.sim, d.resolved.workload);
            }
        }
    }

    fn room_ues(&self, scenario_id: u32) -> BTreeSet<String> {
        let Some(d) = self.deployments.get(&scenario_id) else { return BTreeSet::new() };
        match d.scenario.ru.location {
            Some(loc) => self.ue_db.in_room(&loc.to_string()).into_iter().map(|u| u.serial_number.clone()).collect(),
            None => self.ue_db.iter().map(|u| u.serial_number.clone()).collect(),
        }
    }

    /// Specializes and starts a deployment pipeline.
    pub fn deploy(&mut self, scenario: &NetworkScenario) -> Result<u64, OrchestratorError> {
        if self.deployments.contains_key(&scenario.id) {
            return Err(OrchestratorError::AlreadyDeployed(scenario.id));
        }
        let resolved = specialize_deployment(&self.catalog, &self.inventory, &self.cfg.policy, scenario, &mut self.sim, &mut self.scheduler)?;
        let workload = resolved.workload;
        self.sim.log("deployment_resolved", json!({ "scenario": scenario.id, "resolved": resolved }));
        self.deployments.insert(
            scenario.id,
            Deployment {
                scenario: scenario.clone(),
                resolved,
                status: DeploymentStatus::Deploying,
                record: None,
                attached_ues: BTreeSet::new(),
                tests_run: 0,
                ru_resets: 0,
                redeploy_runs: Vec::new(),
            },
        );
        Ok(self.start_run(RunKind::Deploy, scenario.id, Some(workload), None))
    }

    /// Deploys and drives the simulation until the pipeline finishes.
    pub fn run_deployment_pipeline(&mut self, scenario: &NetworkScenario) -> Result<DeploymentRecord, OrchestratorError> {
        let run = self.deploy(scenario)?;
        let r = self.complete(run)?.clone();
        if r.state == RunState::Failed {
            return Err(OrchestratorError::PipelineFailed { run, kind: r.kind, message: r.error.unwrap_or_default() });
        }
        self.deployments[&scenario.id].record.clone().ok_or(OrchestratorError::PipelineFailed {
            run,
            kind: RunKind::Deploy,
            message: "deployment record missing".into(),
        })
    }

    /// Picks UEs for a test: explicit serials, or UEs in the RU's room
    /// first and then the rest, in serial order. Emulated RUs bring their
    /// own UEs.
    fn select_ues(&self, d: &Deployment, count: usize, serials: Option<&[String]>) -> Result<Vec<(String, String)>, OrchestratorError> {
        if let Some(list) = serials {
            if list.len() != count {
                return Err(OrchestratorError::NotEnoughUes { requested: count, available: list.len() });
            }
            return list
                .iter()
                .map(|s| self.ue_db.get(s).map(|u| (u.serial_number.clone(), u.ue_model.clone())).ok_or_else(|| OrchestratorError::UnknownUe(s.clone())))
                .collect();
        }
        if self.cfg.performance.emulated_ru_class.contains_key(&d.scenario.ru.name) {
            return Ok((0..count).map(|i| (format!("{}-ue-{i}", d.scenario.ru.name), "emulated".to_owned())).collect());
        }
        let room = d.scenario.ru.location.map(|l| l.to_string());
        let (mut near, far): (Vec<_>, Vec<_>) = self.ue_db.iter().partition(|u| room.as_deref().is_none_or(|r| u.room() == r));
        near.extend(far);
        if near.len() < count {
            return Err(OrchestratorError::NotEnoughUes { requested: count, available: near.len() });
        }
        Ok(near.into_iter().take(count).map(|u| (u.serial_number.clone(), u.ue_model.clone())).collect())
    }

    /// Starts a test pipeline against a ready deployment.
    pub fn start_test(&mut self, spec: &TestSpec, serials: Option<&[String]>) -> Result<u64, OrchestratorError> {
        let d = self.deployments.get(&spec.scenario_id).ok_or(OrchestratorError::UnknownScenario(spec.scenario_id))?;
        if d.status != DeploymentStatus::Ready {
            return Err(OrchestratorError::DeploymentNotReady { id: spec.scenario_id, status: d.status });
        }
        let ues = self.select_ues(d, spec.ue_specifications.len(), serials)?;
        let workload = d.resolved.workload;
        let d = self.deployments.get_mut(&spec.scenario_id).expect("checked");
        d.tests_run += 1;
        let seq = d.tests_run;
        let ctx = TestContext { spec: spec.clone(), ues, seq, traffic: None };
        Ok(self.start_run(RunKind::Test, spec.scenario_id, Some(workload), Some(ctx)))
    }

    pub fn run_test_pipeline(&mut self, spec: &TestSpec, serials: Option<&[String]>) -> Result<TestOutcome, OrchestratorError> {
        let run = self.start_test(spec, serials)?;
        let r = self.complete(run)?.clone();
        if r.state == RunState::Failed {
            return Err(OrchestratorError::PipelineFailed { run, kind: r.kind, message: r.error.unwrap_or_default() });
        }
        self.test_outcomes.get(&run).cloned().ok_or(OrchestratorError::PipelineFailed { run, kind: RunKind::Test, message: "no test outcome".into() })
    }

    fn persist_test(&mut self, run: u64, a: &ActiveRun) -> Result<TestOutcome, String> {
        let ctx = a.test.as_ref().ok_or("missing test context")?;
        let d = self.deployments.get(&a.scenario_id).ok_or("deployment vanished")?;
        let node = self.sim.node(&d.resolved.target_node).ok_or("node vanished")?;
        let family = node.spec.family();
        let stack = d.resolved.stack.as_str();
        let (start, end) = ctx.traffic.ok_or("traffic window missing")?;
        let model = &self.cfg.performance;
        let shared_load = self.sim.loads_on(&node.spec.id, start, end).iter().any(|l| matches!(l.kind, crate::cluster::LoadKind::SharedCores));
        let impairment = if shared_load { model.coexistence_penalty } else { 0.0 };
        let share = 1.0 / ctx.spec.ue_specifications.len().max(1) as f64;
        let mut ues = Vec::new();
        for (i, (ue, (serial, ue_model))) in ctx.spec.ue_specifications.iter().zip(&ctx.ues).enumerate() {
            let class = model.ue_class_for(ue_model, &d.scenario.ru.name);
            let direction = if ue.is_downlink() { Direction::Dl } else { Direction::Ul };
            let key = ProfileKey::new(&family, stack, &class, direction);
            let seed = rng::stream_seed(self.cfg.seed, &[rng::label("traffic"), a.scenario_id as u64, ctx.seq, i as u64]);
            let shaping = Shaping { offered_mbps: Some(ue.bandwidth_mbps), share, impairment };
            let series = synthesize_performance(model, &key, ue.duration as f64, seed, shaping).map_err(|e| e.to_string())?;
            ues.push(UeResult {
                serial: serial.clone(),
                ue_class: class,
                direction,
                test_type: ue.test_type,
                protocol: ue.protocol,
                offered_mbps: ue.bandwidth_mbps,
                summary: SeriesSummary::of(&series),
                series,
            });
        }
        let record = TestRecord::new(a.scenario_id, stack, &d.resolved.target_node, &family, start, end, ues);
        let id = self.store.record(record.clone()).map_err(|e| e.to_string())?;
        let record = TestRecord { id, ..record };
        let filter = RecordFilter { scenario_id: Some(a.scenario_id), stack: Some(stack.to_owned()), ..RecordFilter::default() };
        let verdict = self.store.compare_baseline(&record, &filter, self.cfg.baseline_threshold).ok();
        self.sim.log("test_recorded", json!({ "run": run, "record": id, "mean_mbps": record.mean_throughput_mbps }));
        let mut snapshot = self.runs[&run].clone();
        snapshot.state = RunState::Succeeded;
        Ok(TestOutcome { run: snapshot, record, verdict })
    }

    /// Starts a teardown pipeline.
    pub fn teardown(&mut self, scenario_id: u32) -> Result<u64, OrchestratorError> {
        let d = self.deployments.get_mut(&scenario_id).ok_or(OrchestratorError::UnknownScenario(scenario_id))?;
        d.status = DeploymentStatus::TearingDown;
        Ok(self.start_run(RunKind::Teardown, scenario_id, None, None))
    }

    pub fn run_teardown(&mut self, scenario_id: u32) -> Result<PipelineRun, OrchestratorError> {
        let run = self.teardown(scenario_id)?;
        Ok(self.complete(run)?.clone())
    }

    /// Removes a deployment whose gNB is gone (failed redeploy) without a
    /// pipeline.
    pub(crate) fn forget(&mut self, scenario_id: u32) {
        if let Some(d) = self.deployments.remove(&scenario_id) {
            if self.scheduler.get(d.resolved.workload).is_some_and(|p| p.state.is_active()) {
                let _ = self.scheduler.terminate(&mut self.sim, d.resolved.workload);
            }
        }
    }

    // ---- cluster operations ----

    pub fn add_node(&mut self, spec: NodeSpec, pool: &str) -> Result<String, OrchestratorError> {
        Ok(self.sim.add_node(spec, pool)?)
    }

    pub fn inject_failure(&mut self, node: &str, at: SimTime) -> Result<SimTime, OrchestratorError> {
        Ok(self.sim.inject_failure(node, at)?)
    }

    pub fn recover_node(&mut self, node: &str) -> Result<SimTime, OrchestratorError> {
        Ok(self.sim.recover_node(node)?)
    }

    /// Moves a node to another pool. Its workloads are drained first and
    /// redeployed inside their own pool. Returns false for a no-op.
    pub fn relabel_node(&mut self, node: &str, pool: &str) -> Result<bool, OrchestratorError> {
        if self.sim.pool(pool).is_none() {
            return Err(ClusterError::UnknownPool(pool.to_owned()).into());
        }
        let n = self.sim.node(node).ok_or_else(|| ClusterError::UnknownNode(node.to_owned()))?;
        match n.state {
            NodeState::Failed => return Err(ClusterError::NodeFailed(node.to_owned()).into()),
            NodeState::Provisioning => return Err(ClusterError::NodeNotReady { node: node.to_owned(), state: n.state }.into()),
            _ if n.pool == pool => return Ok(false),
            _ => {}
        }
        let drained = self.scheduler.drain_node(&mut self.sim, node);
        self.sim.relabel_node(node, pool)?;
        for wl in drained {
            if let Some(id) = self.deployments.values().find(|d| d.resolved.workload == wl).map(|d| d.scenario.id) {
                self.push_timeline(TimelineKind::Evicted, node, Some(id));
                self.redeploy(id, wl);
            }
        }
        Ok(true)
    }

    /// Milestones following the most recent failure of `node`.
    pub fn resilience_timeline(&self, node: &str) -> Option<ResilienceTimeline> {
        let start = self.timeline.iter().rposition(|e| e.kind == TimelineKind::NodeFailed && e.node == node)?;
        let failed_at = self.timeline[start].time;
        let after = &self.timeline[start..];
        let observed_at = after.iter().find(|e| e.kind == TimelineKind::FailureObserved && e.node == node).map(|e| e.time);
        let evicted = after.iter().find(|e| e.kind == TimelineKind::Evicted && e.node == node);
        let scenario_id = evicted.and_then(|e| e.scenario_id);
        let of = |k: TimelineKind| after.iter().find(|e| e.kind == k && scenario_id.is_some() && e.scenario_id == scenario_id);
        Some(ResilienceTimeline {
            node: node.to_owned(),
            failed_at,
            observed_at,
            evicted_at: evicted.map(|e| e.time),
            scenario_id,
            redeployed_to: of(TimelineKind::Redeployed).map(|e| e.node.clone()),
            gnb_ready_at: of(TimelineKind::GnbReady).map(|e| e.time),
            traffic_resumed_at: of(TimelineKind::TrafficResumed).map(|e| e.time),
        })
    }
}
