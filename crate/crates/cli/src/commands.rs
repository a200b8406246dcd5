use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::time::Duration;

use ranorch_core::agent::{
    adversarial_script, compile_intent, convergent_script, evaluate_corpus, run_intent, BackendAdapter, Budgets, CorpusEntry, EmittedConfig,
    FailureReason, Mode, RemoteBackend, ScriptedBackend, SEED_CORPUS,
};
use ranorch_core::cluster::{Arch, ClusterError, NodeSpec, NodeState, SyncState};
use ranorch_core::config::{parse_deployment_file, NetworkScenario, StackKind, TestSpec};
use ranorch_core::pipeline::{DeclaredState, DeploymentRecord, DeploymentStatus, TestOutcome, TimelineKind};
use ranorch_core::scheduler::EvictionTimeout;
use ranorch_core::telemetry::{RecordFilter, Store};
use ranorch_core::SimTime;
use serde::Serialize;
use serde_json::{json, Value};

use crate::app::{write, App, CliError, Exit, Settings};
use crate::args::{AddArgs, AdvanceArgs, BackendArg, ClusterCommand, Command, CorpusArgs, FailArgs, IntentArgs, ModeArg, ReconcileArgs, RelabelArgs, ReportArgs, RunArgs};
use crate::render;

const ARC_SCENARIO: &str = include_str!("../assets/arc.json");
const OAI72_SCENARIO: &str = include_str!("../assets/oai72.json");
const SDR_SCENARIO: &str = include_str!("../assets/srsran_usrp.json");

/// What a command produced. `error` may accompany a partial result; it
/// decides the exit code.
#[derive(Debug, Clone)]
pub struct Output {
    pub doc: Value,
    pub text: String,
    pub error: Option<CliError>,
}

impl Output {
    fn ok(doc: Value, text: String) -> Self {
        Self { doc, text, error: None }
    }

    pub fn exit(&self) -> Exit {
        self.error.as_ref().map_or(Exit::Success, |e| e.exit)
    }

    /// The JSON document, with the error folded in when there is one.
    pub fn json(&self) -> Value {
        let mut doc = self.doc.clone();
        if let Some(e) = &self.error {
            match &mut doc {
                Value::Object(m) => {
                    m.insert("error".into(), e.to_json()["error"].clone());
                }
                _ => doc = e.to_json(),
            }
        }
        doc
    }
}

pub fn execute(app: &mut App, cmd: &Command) -> Result<Output, CliError> {
    match cmd {
        Command::Intent(a) => intent(app, a),
        Command::Run(a) => run(app, a),
        Command::Cluster(c) => match c {
            ClusterCommand::Nodes => Ok(nodes(app)),
            ClusterCommand::Add(a) => add(app, a),
            ClusterCommand::Relabel(a) => relabel(app, a),
            ClusterCommand::Fail(a) => fail(app, a),
            ClusterCommand::Recover { node } => recover(app, node),
            ClusterCommand::Report(a) => report(app, a),
        },
        Command::Reconcile(a) => reconcile(app, a),
        Command::Corpus(a) => corpus(app, a),
        Command::Status => Ok(status(app)),
        Command::Advance(a) => advance(app, a),
        Command::Serve => Err(CliError::validation("serve cannot be nested")),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("output types serialize")
}

// ---- intent ----

fn remote_backend(settings: &Settings, timeout: Duration) -> Result<RemoteBackend, CliError> {
    let url = settings.llm_url.clone().ok_or_else(|| CliError::infrastructure("no remote backend configured; set --llm-url or RANORCH_LLM_URL"))?;
    Ok(RemoteBackend::new(url, settings.llm_model.clone(), settings.llm_api_key.clone(), timeout))
}

fn intent(app: &mut App, a: &IntentArgs) -> Result<Output, CliError> {
    let text = a.text.trim();
    if text.is_empty() {
        return Err(CliError::validation("intent is empty"));
    }
    let mode = match a.mode {
        ModeArg::Deploy => Mode::Deploy,
        ModeArg::Test => Mode::Test,
    };
    let budgets = Budgets { max_iterations: a.max_iterations, wall: Duration::from_secs(a.timeout) };
    let mut backend: Box<dyn BackendAdapter> = match a.backend {
        BackendArg::Scripted => {
            let plan = compile_intent(text, mode);
            let steps = if a.adversarial { adversarial_script(&plan) } else { convergent_script(&plan) };
            Box::new(ScriptedBackend::new(steps))
        }
        BackendArg::Remote => Box::new(remote_backend(&app.settings, budgets.wall)?),
    };
    let out = run_intent(&app.orch.catalog, text, mode, backend.as_mut(), budgets);
    if let Some(p) = &a.trace {
        write(p, out.trace_jsonl().as_bytes())?;
    }
    let config = out.config.as_ref().map(|c| serde_json::from_str::<Value>(&c.to_json()).expect("emitted config is JSON"));
    let mut doc = json!({
        "intent": text,
        "mode": mode,
        "backend": backend.name(),
        "config": config,
        "metrics": out.metrics,
    });
    let mut human = String::new();
    render::metrics(&mut human, backend.name(), &out.metrics);
    let Some(cfg) = out.config else {
        let exit = if out.metrics.failure_reason == Some(FailureReason::BackendError) { Exit::Infrastructure } else { Exit::Validation };
        let why = out.metrics.error.clone().unwrap_or_else(|| "no valid configuration within budget".into());
        return Ok(Output { doc, text: human, error: Some(CliError::new(exit, format!("agent failed: {why}"))) });
    };
    let _ = writeln!(human, "{}", cfg.to_json().trim_end());
    if !a.execute {
        return Ok(Output::ok(doc, human));
    }
    let executed = match &cfg {
        EmittedConfig::Deployment(s) => app.deploy(s).map(|rec| {
            render::deployment(&mut human, &rec);
            to_value(&rec)
        }),
        EmittedConfig::Test(t) => execute_test_intent(app, a, t, &mut human),
    };
    match executed {
        Ok(v) => {
            doc["execution"] = v;
            Ok(Output::ok(doc, human))
        }
        Err(e) => Ok(Output { doc, text: human, error: Some(e) }),
    }
}

fn execute_test_intent(app: &mut App, a: &IntentArgs, spec: &TestSpec, human: &mut String) -> Result<Value, CliError> {
    let mut spec = spec.clone();
    let mut deployment = Value::Null;
    if let Some(path) = &a.deploy {
        let scenario = app.load_scenario(path)?;
        let rec = app.deploy(&scenario)?;
        render::deployment(human, &rec);
        spec.scenario_id = scenario.id;
        deployment = to_value(&rec);
    }
    let outcome = run_test(app, &spec, None)?;
    render::test(human, &outcome);
    Ok(json!({ "deployment": deployment, "test": outcome }))
}

pub fn run_test(app: &mut App, spec: &TestSpec, serials: Option<&[String]>) -> Result<TestOutcome, CliError> {
    let run = app.orch.start_test(spec, serials)?;
    app.drive(run)?;
    app.orch.test_outcome(run).cloned().ok_or_else(|| CliError::execution(format!("test run {run} left no outcome")))
}

// ---- run ----

fn run(app: &mut App, a: &RunArgs) -> Result<Output, CliError> {
    if a.deploy.is_empty() && a.test.is_empty() {
        return Err(CliError::validation("nothing to run: pass --deploy and/or --test"));
    }
    let scenarios = a.deploy.iter().map(|p| app.load_scenario(p)).collect::<Result<Vec<_>, _>>()?;
    let mut tests = a.test.iter().map(|p| app.load_test(p)).collect::<Result<Vec<_>, _>>()?;
    let mut seen = BTreeSet::new();
    for s in &scenarios {
        if !seen.insert(s.id) {
            return Err(CliError::validation(format!("scenario {} is declared twice", s.id)));
        }
    }
    if let Some(id) = a.scenario {
        tests.iter_mut().for_each(|t| t.scenario_id = id);
    }

    let mut text = String::new();
    let mut errors: Vec<CliError> = Vec::new();
    // start every deployment before driving any, so they share the clock
    let started: Vec<(u32, Result<u64, CliError>)> = scenarios.iter().map(|s| (s.id, app.orch.deploy(s).map_err(CliError::from))).collect();
    let mut records: Vec<DeploymentRecord> = Vec::new();
    for (id, started) in started {
        match started.and_then(|run| app.drive(run).and_then(|_| app.record_of(id, run))) {
            Ok(rec) => {
                render::deployment(&mut text, &rec);
                records.push(rec);
            }
            Err(e) => errors.push(CliError { message: format!("scenario {id}: {}", e.message), ..e }),
        }
    }
    let serials = (!a.ues.is_empty()).then_some(a.ues.as_slice());
    let mut outcomes = Vec::new();
    for (spec, path) in tests.iter().zip(&a.test) {
        match run_test(app, spec, serials) {
            Ok(o) => {
                render::test(&mut text, &o);
                outcomes.push(o);
            }
            Err(e) => errors.push(CliError { message: format!("{}: {}", path.display(), e.message), ..e }),
        }
    }
    let mut torn_down = Vec::new();
    if a.teardown {
        for rec in &records {
            let run = app.orch.teardown(rec.scenario_id)?;
            match app.drive(run) {
                Ok(()) => torn_down.push(rec.scenario_id),
                Err(e) => errors.push(e),
            }
        }
    }
    if let Some(p) = &a.ledger {
        write(p, app.orch.ledger_jsonl().as_bytes())?;
    }
    let doc = json!({
        "deployments": records,
        "tests": outcomes,
        "torn_down": torn_down,
        "failures": errors.iter().map(|e| json!({ "exit_code": e.exit.code(), "message": e.message })).collect::<Vec<_>>(),
    });
    let error = match errors.len() {
        0 => None,
        1 => errors.pop(),
        n => {
            let first = errors[0].exit;
            let joined = errors.iter().map(|e| e.message.as_str()).collect::<Vec<_>>().join("; ");
            Some(CliError::new(first, format!("{n} failures: {joined}")))
        }
    };
    Ok(Output { doc, text, error })
}

// ---- cluster ----

#[derive(Debug, Clone, Serialize)]
pub struct NicView {
    pub nic: String,
    pub capacity_gbps: u32,
    pub enabled: u32,
    pub allocated: u32,
}

/// Resource summary of one node.
#[derive(Debug, Clone, Serialize)]
pub struct NodeView {
    pub id: String,
    pub model: String,
    pub family: String,
    pub arch: Arch,
    pub pool: String,
    pub state: NodeState,
    pub reconfiguring: bool,
    pub ptp: SyncState,
    pub cpu_cores: u32,
    pub isolated_free: usize,
    pub gpus: Vec<String>,
    pub gpu_slots_used: usize,
    pub gpu_slots_total: usize,
    pub nics: Vec<NicView>,
    pub workloads: BTreeSet<String>,
}

fn node_view(app: &App, id: &str) -> Option<NodeView> {
    let n = app.orch.sim.node(id)?;
    let slots = n.gpu_slots.iter().flatten();
    let mut workloads: BTreeSet<String> = n.core_grants.values().cloned().collect();
    workloads.extend(n.nics.values().flat_map(|p| p.allocated.values().map(|a| a.owner.clone())));
    workloads.extend(slots.clone().flatten().cloned());
    Some(NodeView {
        id: n.spec.id.clone(),
        model: n.spec.model.clone(),
        family: n.spec.family(),
        arch: n.spec.arch,
        pool: n.pool.clone(),
        state: n.state,
        reconfiguring: n.reconfiguring,
        ptp: n.ptp_state,
        cpu_cores: n.spec.cpu_cores,
        isolated_free: n.free_isolated_cores().len(),
        gpus: n.spec.gpus.iter().map(|g| g.model.clone()).collect(),
        gpu_slots_used: slots.clone().filter(|s| s.is_some()).count(),
        gpu_slots_total: slots.count(),
        nics: n
            .nics
            .values()
            .map(|p| NicView { nic: p.nic.clone(), capacity_gbps: p.capacity_gbps, enabled: p.enabled, allocated: p.allocated.len() as u32 })
            .collect(),
        workloads,
    })
}

fn nodes(app: &App) -> Output {
    let views: Vec<NodeView> = app.orch.sim.nodes().filter_map(|n| node_view(app, n.id())).collect();
    let mut text = String::new();
    render::nodes(&mut text, &views);
    Output::ok(json!({ "now_s": app.orch.sim.now().as_secs_f64(), "nodes": views }), text)
}

fn unknown_node(id: &str) -> CliError {
    ClusterError::UnknownNode(id.to_owned()).into()
}

/// Steps from event to event until `done` holds or nothing is left to do.
fn wait_until(app: &mut App, done: impl Fn(&App) -> bool) -> bool {
    while !done(app) {
        match app.orch.sim.next_event_time() {
            Some(t) => app.advance_to(t),
            None => return false,
        }
    }
    true
}

fn settled(app: &App, id: &str) -> bool {
    app.orch.sim.node(id).is_some_and(|n| n.is_ready() && !n.reconfiguring)
}

fn add(app: &mut App, a: &AddArgs) -> Result<Output, CliError> {
    let spec: NodeSpec = match (&a.spec, &a.like) {
        (Some(p), _) => {
            let text = crate::app::read(p)?;
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", p.display())))?
        }
        (None, Some(like)) => {
            let mut spec = app.orch.sim.node(like).ok_or_else(|| unknown_node(like))?.spec.clone();
            spec.id = a.id.clone().unwrap_or_default();
            spec
        }
        (None, None) => return Err(CliError::validation("pass --spec or --like")),
    };
    if spec.id.is_empty() {
        return Err(CliError::validation("node id is empty"));
    }
    let id = app.orch.add_node(spec, &a.pool)?;
    let ready = a.wait && wait_until(app, |s| settled(s, &id));
    let view = node_view(app, &id).expect("just added");
    let mut text = String::new();
    render::nodes(&mut text, std::slice::from_ref(&view));
    let ready_at = ready.then(|| app.orch.sim.now().as_secs_f64());
    Ok(Output::ok(json!({ "node": view, "ready_at_s": ready_at }), text))
}

fn relabel(app: &mut App, a: &RelabelArgs) -> Result<Output, CliError> {
    let from = app.orch.sim.node(&a.node).ok_or_else(|| unknown_node(&a.node))?.pool.clone();
    let changed = app.orch.relabel_node(&a.node, &a.pool)?;
    let ready = a.wait && wait_until(app, |s| settled(s, &a.node));
    let view = node_view(app, &a.node).expect("node exists");
    let mut text = if changed { format!("{} moved from {from} to {}\n", a.node, a.pool) } else { format!("{} is already in {}\n", a.node, a.pool) };
    render::nodes(&mut text, std::slice::from_ref(&view));
    let ready_at = ready.then(|| app.orch.sim.now().as_secs_f64());
    Ok(Output::ok(json!({ "node": view, "from": from, "to": a.pool, "changed": changed, "ready_at_s": ready_at }), text))
}

fn recover(app: &mut App, node: &str) -> Result<Output, CliError> {
    let at = app.orch.recover_node(node)?;
    let view = node_view(app, node).expect("node exists");
    let mut text = String::new();
    render::nodes(&mut text, std::slice::from_ref(&view));
    Ok(Output::ok(json!({ "node": view, "ready_at_s": at.as_secs_f64() }), text))
}

fn parse_timeout(s: &str) -> Result<EvictionTimeout, CliError> {
    match s {
        "default" => Ok(EvictionTimeout::Default),
        "never" | "inf" | "infinite" => Ok(EvictionTimeout::Never),
        n => n
            .parse::<f64>()
            .ok()
            .filter(|v| *v >= 0.0 && v.is_finite())
            .map(|v| EvictionTimeout::After(SimTime::from_secs_f64(v)))
            .ok_or_else(|| CliError::validation(format!("evict timeout must be seconds, `never` or `default`, got `{n}`"))),
    }
}

/// Built-in scenario matching a pool, if the pool hosts gNBs.
fn builtin_for(pool: &str) -> Option<&'static str> {
    match pool {
        "worker-gh" => Some(ARC_SCENARIO),
        "worker-gb" => Some(OAI72_SCENARIO),
        "worker-mw" => Some(SDR_SCENARIO),
        _ => None,
    }
}

/// Deploys `scenario` onto `node` by cordoning its pool peers while the
/// scheduler places it.
fn deploy_pinned(app: &mut App, scenario: &NetworkScenario, node: &str) -> Result<DeploymentRecord, CliError> {
    let pool = app.orch.sim.node(node).ok_or_else(|| unknown_node(node))?.pool.clone();
    let peers: Vec<String> = app.orch.sim.nodes_in_pool(&pool).filter(|n| n.id() != node && n.state == NodeState::Ready).map(|n| n.id().to_owned()).collect();
    for p in &peers {
        app.orch.sim.cordon(p)?;
    }
    let started = app.orch.deploy(scenario);
    for p in &peers {
        app.orch.sim.uncordon(p)?;
    }
    let run = started?;
    app.drive(run)?;
    app.record_of(scenario.id, run)
}

fn fail(app: &mut App, a: &FailArgs) -> Result<Output, CliError> {
    let timeout = parse_timeout(&a.evict_timeout)?;
    let pool = app.orch.sim.node(&a.node).ok_or_else(|| unknown_node(&a.node))?.pool.clone();
    let mut text = String::new();
    let mut deployed = None;
    let hosts_gnb = |app: &App| app.orch.deployments().any(|d| d.resolved.target_node == a.node && d.status == DeploymentStatus::Ready);
    if let Some(path) = &a.deploy {
        let scenario = app.load_scenario(path)?;
        deployed = Some(deploy_pinned(app, &scenario, &a.node)?);
    } else if !hosts_gnb(app) {
        if let Some(text) = builtin_for(&pool) {
            let mut scenario = parse_deployment_file(text, &app.orch.catalog).map_err(|e| CliError::validation(e.to_string()))?;
            while app.orch.deployment(scenario.id).is_some() {
                scenario.id += 1;
            }
            deployed = Some(deploy_pinned(app, &scenario, &a.node)?);
        }
    }
    if let Some(rec) = &deployed {
        render::deployment(&mut text, rec);
    }
    app.orch.sim.set_detection_delay(SimTime::from_secs(a.detect_delay));
    app.orch.set_eviction_timeout(timeout);
    let failed_at = app.orch.sim.now();
    app.orch.inject_failure(&a.node, failed_at)?;
    app.advance_to(failed_at + SimTime::from_secs(a.horizon));
    let tl = app.orch.resilience_timeline(&a.node).expect("failure was just recorded");
    let events: Vec<_> = app
        .orch
        .timeline()
        .iter()
        .filter(|e| e.time >= failed_at && (e.node == a.node || (tl.scenario_id.is_some() && e.scenario_id == tl.scenario_id)))
        .cloned()
        .collect();
    render::timeline(&mut text, &tl, &events);
    let redeploy_failed = events.iter().any(|e| e.kind == TimelineKind::RedeployFailed);
    let doc = json!({
        "node": a.node,
        "pool": pool,
        "detect_delay_s": a.detect_delay,
        "evict_timeout": a.evict_timeout,
        "deployment": deployed,
        "timeline": tl,
        "offsets": tl.offsets(),
        "events": events,
    });
    let error = redeploy_failed.then(|| CliError::execution(format!("no node in {pool} could take the evicted workload")));
    Ok(Output { doc, text, error })
}

#[derive(Debug, Clone, Serialize)]
struct RecordSummary {
    id: u64,
    scenario_id: u32,
    stack: String,
    node: String,
    started_at_s: f64,
    ended_at_s: f64,
    ues: usize,
    mean_throughput_mbps: f64,
    mean_rtt_ms: f64,
}

fn report(app: &mut App, a: &ReportArgs) -> Result<Output, CliError> {
    let filter = RecordFilter { scenario_id: a.scenario, stack: a.stack.clone(), node_family: a.family.clone(), ..RecordFilter::default() };
    let records = app.orch.store.query(&filter);
    if let Some(p) = &a.csv {
        let f = File::create(p).map_err(|e| CliError::infrastructure(format!("cannot write {}: {e}", p.display())))?;
        Store::export_csv(&records, BufWriter::new(f)).map_err(|e| CliError::infrastructure(e.to_string()))?;
    }
    let rows: Vec<RecordSummary> = records
        .iter()
        .map(|r| RecordSummary {
            id: r.id,
            scenario_id: r.scenario_id,
            stack: r.stack.clone(),
            node: r.node.clone(),
            started_at_s: r.started_at.as_secs_f64(),
            ended_at_s: r.ended_at.as_secs_f64(),
            ues: r.ues.len(),
            mean_throughput_mbps: r.mean_throughput_mbps,
            mean_rtt_ms: r.mean_rtt_ms,
        })
        .collect();
    let mut text = format!("{} records\n", rows.len());
    if !rows.is_empty() {
        let _ = writeln!(text, "{:>5} {:>9} {:<11} {:<12} {:>4} {:>10} {:>8}", "id", "scenario", "stack", "node", "ues", "mean_mbps", "rtt_ms");
    }
    for r in &rows {
        let _ = writeln!(text, "{:>5} {:>9} {:<11} {:<12} {:>4} {:>10.1} {:>8.1}", r.id, r.scenario_id, r.stack, r.node, r.ues, r.mean_throughput_mbps, r.mean_rtt_ms);
    }
    if let Some(p) = &a.csv {
        let _ = writeln!(text, "wrote {}", p.display());
    }
    Ok(Output::ok(json!({ "records": rows, "csv": a.csv }), text))
}

// ---- reconcile, corpus, status ----

fn reconcile(app: &mut App, a: &ReconcileArgs) -> Result<Output, CliError> {
    let declared = DeclaredState::load_dir(&a.dir, &app.orch)?;
    let report = app.reconciler.converge(&mut app.orch, &declared, a.passes);
    let remaining = app.reconciler.plan(&app.orch, &declared);
    let views = deployment_views(app);
    let mut text = format!("{} passes, {} actions applied, {} failed\n", report.passes, report.applied.len(), report.failed.len());
    for act in &report.applied {
        let _ = writeln!(text, "  applied {}", serde_json::to_string(act).unwrap_or_default());
    }
    for (act, why) in &report.failed {
        let _ = writeln!(text, "  failed  {}: {why}", serde_json::to_string(act).unwrap_or_default());
    }
    render::deployments(&mut text, &views);
    let error = match (report.failed.len(), remaining.len()) {
        (0, 0) => None,
        (0, n) => Some(CliError::execution(format!("{n} actions still pending after {} passes", a.passes))),
        (n, _) => Some(CliError::execution(format!("{n} actions failed"))),
    };
    let doc = json!({ "report": report, "remaining": remaining, "deployments": views });
    Ok(Output { doc, text, error })
}

fn corpus(app: &mut App, a: &CorpusArgs) -> Result<Output, CliError> {
    let text = match &a.file {
        Some(p) => crate::app::read(p)?,
        None => SEED_CORPUS.to_owned(),
    };
    let entries = CorpusEntry::load(&text).map_err(|e| CliError::validation(format!("corpus: {e}")))?;
    let budgets = Budgets { wall: Duration::from_secs(a.timeout), ..Budgets::default() };
    let report = match a.backend {
        BackendArg::Scripted => {
            let adversarial = a.adversarial;
            let mut make = |e: &CorpusEntry, _| -> Box<dyn BackendAdapter> {
                let plan = compile_intent(&e.prompt, e.mode);
                Box::new(ScriptedBackend::new(if adversarial { adversarial_script(&plan) } else { convergent_script(&plan) }))
            };
            evaluate_corpus(&app.orch.catalog, &entries, a.reps, budgets, &mut make)
        }
        BackendArg::Remote => {
            remote_backend(&app.settings, budgets.wall)?;
            let settings = app.settings.clone();
            let mut make = |_: &CorpusEntry, _| -> Box<dyn BackendAdapter> { Box::new(remote_backend(&settings, budgets.wall).expect("checked above")) };
            evaluate_corpus(&app.orch.catalog, &entries, a.reps, budgets, &mut make)
        }
    };
    let mut human = report.render_table();
    for p in &report.prompts {
        let _ = writeln!(human, "  {:>2}/{:<2} {:>5.1} it  {}", p.successes, p.runs, p.mean_iterations, p.prompt);
    }
    Ok(Output::ok(to_value(&report), human))
}

#[derive(Debug, Clone, Serialize)]
pub struct DeploymentView {
    pub scenario_id: u32,
    pub stack: StackKind,
    pub node: String,
    pub pool: String,
    pub status: DeploymentStatus,
    pub tests_run: u64,
    pub ru_resets: u32,
}

fn deployment_views(app: &App) -> Vec<DeploymentView> {
    app.orch
        .deployments()
        .map(|d| DeploymentView {
            scenario_id: d.scenario.id,
            stack: d.resolved.stack,
            node: d.resolved.target_node.clone(),
            pool: d.resolved.pool.clone(),
            status: d.status,
            tests_run: d.tests_run,
            ru_resets: d.ru_resets,
        })
        .collect()
}

fn status(app: &App) -> Output {
    let views = deployment_views(app);
    let now = app.orch.sim.now().as_secs_f64();
    let mut text = format!("simulated time {now:.1} s, {} events pending\n", app.orch.sim.pending_events());
    render::deployments(&mut text, &views);
    let runs: Vec<Value> = app
        .orch
        .runs()
        .map(|r| json!({ "id": r.id, "kind": r.kind, "scenario_id": r.scenario_id, "state": r.state, "total_s": r.total().as_secs_f64() }))
        .collect();
    Output::ok(json!({ "now_s": now, "pending_events": app.orch.sim.pending_events(), "deployments": views, "runs": runs }), text)
}

fn advance(app: &mut App, a: &AdvanceArgs) -> Result<Output, CliError> {
    if !(a.seconds >= 0.0 && a.seconds.is_finite()) {
        return Err(CliError::validation(format!("cannot advance by {} s", a.seconds)));
    }
    let target = app.orch.sim.now() + SimTime::from_secs_f64(a.seconds);
    app.advance_to(target);
    Ok(status(app))
}
