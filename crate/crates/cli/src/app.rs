use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use ranorch_core::agent::{BackendError, ENV_API_KEY};
use ranorch_core::cluster::{ClusterError, ClusterSeed};
use ranorch_core::config::{parse_deployment_file, parse_test_file_with, parse_ue_database, ConfigError, NetworkScenario, ResolveError, RuInventory, TestSpec};
use ranorch_core::pipeline::{DeploymentRecord, LoadError, Orchestrator, OrchestratorConfig, OrchestratorError, Reconciler, RunKind, RunState, TimingModel, SEED_UE_DATABASE};
use ranorch_core::telemetry::{PerformanceModel, Store};
use ranorch_core::{Catalog, SimTime};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::GlobalArgs;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Exit {
    Success = 0,
    /// Bad input: schema, compatibility, agent budget.
    Validation = 1,
    /// A pipeline or scenario operation failed.
    Execution = 2,
    /// Unknown node or pool, unreachable backend, storage.
    Infrastructure = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
    /// Offending field, for schema errors.
    pub path: Option<String>,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        Self { exit, message: message.into(), path: None }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Exit::Validation, message)
    }

    pub fn execution(message: impl Into<String>) -> Self {
        Self::new(Exit::Execution, message)
    }

    pub fn infrastructure(message: impl Into<String>) -> Self {
        Self::new(Exit::Infrastructure, message)
    }

    /// Error document printed in `--json` mode.
    pub fn to_json(&self) -> Value {
        let mut e = json!({ "exit_code": self.exit.code(), "kind": self.exit, "message": self.message });
        if let Some(p) = &self.path {
            e["path"] = json!(p);
        }
        json!({ "error": e })
    }

    fn config(file: &Path, e: ConfigError) -> Self {
        let path = e.path().map(str::to_owned);
        Self { exit: Exit::Validation, message: format!("{}: {e}", file.display()), path }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        use OrchestratorError as E;
        let exit = match &e {
            E::Resolve(ResolveError::Invalid(_) | ResolveError::Catalog(_) | ResolveError::UnknownRu { .. }) | E::UnknownUe(_) => Exit::Validation,
            E::Cluster(_) | E::Telemetry(_) => Exit::Infrastructure,
            _ => Exit::Execution,
        };
        Self::new(exit, e.to_string())
    }
}

impl From<ClusterError> for CliError {
    fn from(e: ClusterError) -> Self {
        Self::infrastructure(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        Self::infrastructure(e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let path = match &e {
            LoadError::Config { source, .. } => source.path().map(str::to_owned),
            _ => None,
        };
        Self { exit: Exit::Validation, message: e.to_string(), path }
    }
}

/// Optional settings file. Relative paths are taken from its directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSettings {
    seed: Option<u64>,
    cluster: Option<PathBuf>,
    catalog: Option<PathBuf>,
    timing: Option<PathBuf>,
    performance: Option<PathBuf>,
    inventory: Option<PathBuf>,
    ue_db: Option<PathBuf>,
    store: Option<PathBuf>,
    pace: Option<f64>,
    no_jitter: Option<bool>,
    llm_url: Option<String>,
    llm_model: Option<String>,
}

/// Fully resolved settings: flag, then environment, then settings file,
/// then the built-in default.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Settings {
    pub json: bool,
    pub seed: u64,
    pub cluster: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub timing: Option<PathBuf>,
    pub performance: Option<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub ue_db: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub pace: f64,
    pub no_jitter: bool,
    pub llm_url: Option<String>,
    pub llm_model: String,
    #[serde(skip)]
    pub llm_api_key: Option<String>,
}

impl Settings {
    pub fn resolve(g: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &g.config {
            Some(p) => {
                let text = read(p)?;
                let mut f: FileSettings = serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?;
                let base = p.parent().unwrap_or(Path::new(""));
                for slot in [&mut f.cluster, &mut f.catalog, &mut f.timing, &mut f.performance, &mut f.inventory, &mut f.ue_db, &mut f.store] {
                    if let Some(path) = slot.as_mut().filter(|p| p.is_relative()) {
                        *path = base.join(&*path);
                    }
                }
                f
            }
            None => FileSettings::default(),
        };
        let pace = g.pace.or(file.pace).unwrap_or(0.0);
        if !(pace >= 0.0 && pace.is_finite()) {
            return Err(CliError::validation(format!("pace must be a non-negative number, got {pace}")));
        }
        Ok(Self {
            json: g.json,
            seed: g.seed.or(file.seed).unwrap_or(0),
            cluster: g.cluster.clone().or(file.cluster),
            catalog: g.catalog.clone().or(file.catalog),
            timing: g.timing.clone().or(file.timing),
            performance: g.performance.clone().or(file.performance),
            inventory: g.inventory.clone().or(file.inventory),
            ue_db: g.ue_db.clone().or(file.ue_db),
            store: g.store.clone().or(file.store),
            pace,
            no_jitter: g.no_jitter || file.no_jitter.unwrap_or(false),
            llm_url: g.llm_url.clone().or(file.llm_url),
            llm_model: g.llm_model.clone().or(file.llm_model).unwrap_or_else(|| "default".into()),
            llm_api_key: std::env::var(ENV_API_KEY).ok(),
        })
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

pub fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::infrastructure(format!("cannot write {}: {e}", path.display())))
}

/// One simulation instance plus the state commands share across a `serve`
/// session.
pub struct App {
    pub orch: Orchestrator,
    pub settings: Settings,
    pub reconciler: Reconciler,
}

impl App {
    pub fn new(settings: Settings) -> Result<Self, CliError> {
        let bad = |p: &Path, e: String| CliError::validation(format!("{}: {e}", p.display()));
        let mut cfg = OrchestratorConfig { seed: settings.seed, ..OrchestratorConfig::default() };
        if let Some(p) = &settings.timing {
            cfg.timing = TimingModel::from_json(&read(p)?).map_err(|e| bad(p, e))?;
        }
        if let Some(p) = &settings.performance {
            cfg.performance = PerformanceModel::from_json(&read(p)?).map_err(|e| bad(p, e.to_string()))?;
        }
        if settings.no_jitter {
            cfg.timing = cfg.timing.without_jitter();
        }
        let seed = match &settings.cluster {
            Some(p) => ClusterSeed::from_json(&read(p)?).map_err(|e| bad(p, e.to_string()))?,
            None => ClusterSeed::bundled(),
        };
        let sim = seed.build(settings.seed).map_err(|e| CliError::validation(e.to_string()))?;
        let catalog = match &settings.catalog {
            Some(p) => Catalog::from_json(&read(p)?).map_err(|e| bad(p, e.to_string()))?,
            None => Catalog::seeded(),
        };
        let inventory = match &settings.inventory {
            Some(p) => RuInventory::from_json(&read(p)?).map_err(|e| bad(p, e.to_string()))?,
            None => RuInventory::seeded(),
        };
        let ue_db = match &settings.ue_db {
            Some(p) => parse_ue_database(&read(p)?).map_err(|e| CliError::config(p, e))?,
            None => parse_ue_database(SEED_UE_DATABASE).expect("bundled UE database is valid"),
        };
        let store = match &settings.store {
            Some(dir) => Store::open(dir).map_err(|e| CliError::infrastructure(format!("{}: {e}", dir.display())))?,
            None => Store::in_memory(),
        };
        let orch = Orchestrator::new(cfg, sim, catalog, inventory, ue_db, store);
        Ok(Self { orch, settings, reconciler: Reconciler::new() })
    }

    pub fn load_scenario(&self, path: &Path) -> Result<NetworkScenario, CliError> {
        parse_deployment_file(&read(path)?, &self.orch.catalog).map_err(|e| CliError::config(path, e))
    }

    pub fn load_test(&self, path: &Path) -> Result<TestSpec, CliError> {
        parse_test_file_with(&read(path)?, self.orch.catalog.test_parameters()).map_err(|e| CliError::config(path, e))
    }

    fn pace_step(&self) -> Option<Duration> {
        (self.settings.pace > 0.0).then(|| Duration::from_secs_f64(1.0 / self.settings.pace))
    }

    /// Drives the simulation until `run` finishes, paced when asked.
    pub fn drive(&mut self, run: u64) -> Result<(), CliError> {
        match self.pace_step() {
            None => {
                self.orch.complete(run)?;
            }
            Some(sleep) => {
                while self.orch.is_active(run) {
                    if self.orch.sim.next_event_time().is_none() {
                        return Err(OrchestratorError::Stalled(run).into());
                    }
                    let next = self.orch.sim.now() + SimTime::from_secs(1);
                    self.orch.run_until(next);
                    thread::sleep(sleep);
                }
            }
        }
        let r = self.orch.run(run).expect("run exists once started");
        if r.state == RunState::Failed {
            return Err(OrchestratorError::PipelineFailed { run, kind: r.kind, message: r.error.clone().unwrap_or_default() }.into());
        }
        Ok(())
    }

    /// Advances simulated time to `t`, paced when asked.
    pub fn advance_to(&mut self, t: SimTime) {
        match self.pace_step() {
            None => self.orch.run_until(t),
            Some(sleep) => {
                while self.orch.sim.now() < t {
                    let next = (self.orch.sim.now() + SimTime::from_secs(1)).min(t);
                    self.orch.run_until(next);
                    thread::sleep(sleep);
                }
            }
        }
    }

    /// Deploys and waits for the deployment pipeline.
    pub fn deploy(&mut self, scenario: &NetworkScenario) -> Result<DeploymentRecord, CliError> {
        let run = self.orch.deploy(scenario)?;
        self.drive(run)?;
        self.record_of(scenario.id, run)
    }

    pub fn record_of(&self, scenario_id: u32, run: u64) -> Result<DeploymentRecord, CliError> {
        self.orch.deployment(scenario_id).and_then(|d| d.record.clone()).ok_or_else(|| {
            OrchestratorError::PipelineFailed { run, kind: RunKind::Deploy, message: "deployment record missing".into() }.into()
        })
    }
}
