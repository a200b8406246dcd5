use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::orchestrator::{DeploymentStatus, Orchestrator};
use super::run::RunState;
use crate::config::{parse_deployment_file, parse_test_file_with, ConfigError, NetworkScenario, TestSpec};

/// Desired state read from a directory of deployment and test files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeclaredState {
    pub scenarios: BTreeMap<u32, NetworkScenario>,
    /// Keyed by file stem, so editing a file re-runs its test.
    pub tests: BTreeMap<String, TestSpec>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{file}: {source}")]
    Config { file: String, source: ConfigError },
    #[error("{file}: {message}")]
    Io { file: String, message: String },
    #[error("scenario {id} is declared by both {first} and {second}")]
    Duplicate { id: u32, first: String, second: String },
}

impl DeclaredState {
    /// Reads every `*.json` file in `dir`, in name order. A file whose
    /// `network_scenario` carries `ue_specification` is a test; anything
    /// else is a deployment.
    pub fn load_dir(dir: &Path, orch: &Orchestrator) -> Result<Self, LoadError> {
        let io = |file: &Path, e: std::io::Error| LoadError::Io { file: file.display().to_string(), message: e.to_string() };
        let mut files: Vec<_> = fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let mut state = DeclaredState::default();
        let mut origin: BTreeMap<u32, String> = BTreeMap::new();
        for path in files {
            let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let text = fs::read_to_string(&path).map_err(|e| io(&path, e))?;
            let is_test = serde_json::from_str::<serde_json::Value>(&text)
                .ok()
                .is_some_and(|v| v.pointer("/network_scenario/ue_specification").is_some());
            let cfg = |source| LoadError::Config { file: name.clone(), source };
            if is_test {
                let spec = parse_test_file_with(&text, orch.catalog.test_parameters()).map_err(cfg)?;
                let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                state.tests.insert(stem, spec);
            } else {
                let scenario = parse_deployment_file(&text, &orch.catalog).map_err(cfg)?;
                if let Some(first) = origin.insert(scenario.id, name.clone()) {
                    return Err(LoadError::Duplicate { id: scenario.id, first, second: name });
                }
                state.scenarios.insert(scenario.id, scenario);
            }
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Deploy { scenario_id: u32 },
    /// Declaration changed or the gNB was lost: tear down, then deploy.
    Replace { scenario_id: u32 },
    Teardown { scenario_id: u32 },
    RunTest { scenario_id: u32, key: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReconcileReport {
    pub passes: u32,
    pub applied: Vec<Action>,
    /// Actions that failed, with the reason. They are not retried until
    /// their declaration changes.
    pub failed: Vec<(Action, String)>,
    pub record_ids: Vec<u64>,
}

/// Diffs declared state against the orchestrator and applies the
/// difference: teardowns, then deployments side by side, then tests one at
/// a time.
#[derive(Debug, Clone, Default)]
pub struct Reconciler {
    /// Test key → spec last run.
    applied_tests: BTreeMap<String, TestSpec>,
    /// Declarations that failed to deploy, and test specs that failed.
    failed_decls: BTreeMap<u32, NetworkScenario>,
    failed_tests: BTreeMap<String, TestSpec>,
}

impl Reconciler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn plan(&self, orch: &Orchestrator, declared: &DeclaredState) -> Vec<Action> {
        let mut actions = Vec::new();
        for d in orch.deployments() {
            if !declared.scenarios.contains_key(&d.scenario.id) && d.status != DeploymentStatus::TearingDown {
                actions.push(Action::Teardown { scenario_id: d.scenario.id });
            }
        }
        for (id, s) in &declared.scenarios {
            if self.failed_decls.get(id) == Some(s) {
                continue;
            }
            match orch.deployment(*id) {
                None => actions.push(Action::Deploy { scenario_id: *id }),
                Some(d) if d.scenario != *s || d.status == DeploymentStatus::Failed => actions.push(Action::Replace { scenario_id: *id }),
                Some(_) => {}
            }
        }
        for (key, t) in &declared.tests {
            if self.applied_tests.get(key) == Some(t) || self.failed_tests.get(key) == Some(t) {
                continue;
            }
            actions.push(Action::RunTest { scenario_id: t.scenario_id, key: key.clone() });
        }
        actions
    }

    /// One reconcile pass.
    pub fn apply(&mut self, orch: &mut Orchestrator, declared: &DeclaredState, report: &mut ReconcileReport) {
        // a failure memo only holds while its declaration is unchanged
        self.failed_decls.retain(|id, s| declared.scenarios.get(id) == Some(s));
        self.failed_tests.retain(|k, t| declared.tests.get(k) == Some(t));
        self.applied_tests.retain(|k, _| declared.tests.contains_key(k));
        let actions = self.plan(orch, declared);
        report.passes += 1;
        let fail = |report: &mut ReconcileReport, a: &Action, msg: String| {
            log::warn!("reconcile: {a:?} failed: {msg}");
            report.failed.push((a.clone(), msg));
        };

        // teardowns first, including the old half of replacements
        let mut teardowns = Vec::new();
        for a in &actions {
            match a {
                Action::Teardown { scenario_id } | Action::Replace { scenario_id } => {
                    let failed = orch.deployment(*scenario_id).is_some_and(|d| d.status == DeploymentStatus::Failed);
                    if failed {
                        orch.forget(*scenario_id);
                    } else {
                        match orch.teardown(*scenario_id) {
                            Ok(run) => teardowns.push(run),
                            Err(e) => fail(report, a, e.to_string()),
                        }
                    }
                }
                _ => {}
            }
        }
        for run in teardowns {
            if let Err(e) = orch.complete(run) {
                log::warn!("reconcile: teardown run {run}: {e}");
            }
        }
        for a in &actions {
            if let Action::Teardown { .. } = a {
                report.applied.push(a.clone());
            }
        }

        let mut deploys = Vec::new();
        for a in &actions {
            if let Action::Deploy { scenario_id } | Action::Replace { scenario_id } = a {
                let s = &declared.scenarios[scenario_id];
                match orch.deploy(s) {
                    Ok(run) => deploys.push((a.clone(), run)),
                    Err(e) => {
                        self.failed_decls.insert(*scenario_id, s.clone());
                        fail(report, a, e.to_string());
                    }
                }
            }
        }
        for (a, run) in deploys {
            let result = orch.complete(run).map(|r| (r.state, r.error.clone()));
            let id = match &a {
                Action::Deploy { scenario_id } | Action::Replace { scenario_id } => *scenario_id,
                _ => unreachable!(),
            };
            match result {
                Ok((RunState::Succeeded, _)) => {
                    self.failed_decls.remove(&id);
                    report.applied.push(a);
                }
                Ok((_, err)) => {
                    self.failed_decls.insert(id, declared.scenarios[&id].clone());
                    fail(report, &a, err.unwrap_or_default());
                }
                Err(e) => {
                    self.failed_decls.insert(id, declared.scenarios[&id].clone());
                    fail(report, &a, e.to_string());
                }
            }
        }

        for a in &actions {
            if let Action::RunTest { key, .. } = a {
                let spec = &declared.tests[key];
                match orch.run_test_pipeline(spec, None) {
                    Ok(out) => {
                        self.applied_tests.insert(key.clone(), spec.clone());
                        report.record_ids.push(out.record.id);
                        report.applied.push(a.clone());
                    }
                    Err(e) => {
                        self.failed_tests.insert(key.clone(), spec.clone());
                        fail(report, a, e.to_string());
                    }
                }
            }
        }
    }

    /// Applies passes until a plan comes back empty or `max_passes` is hit.
    pub fn converge(&mut self, orch: &mut Orchestrator, declared: &DeclaredState, max_passes: u32) -> ReconcileReport {
        let mut report = ReconcileReport::default();
        while report.passes < max_passes && !self.plan(orch, declared).is_empty() {
            self.apply(orch, declared, &mut report);
        }
        report
    }

    /// Scenario ids whose current declaration failed to deploy.
    pub fn failed_scenarios(&self, declared: &DeclaredState) -> BTreeSet<u32> {
        self.failed_decls.iter().filter(|(id, s)| declared.scenarios.get(id) == Some(s)).map(|(id, _)| *id).collect()
    }
}
