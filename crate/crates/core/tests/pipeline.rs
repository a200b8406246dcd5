use ranorch_core::cluster::LoadKind;
use ranorch_core::config::{parse_deployment_file, parse_test_file, NetworkScenario, StackKind};
use ranorch_core::pipeline::{
    DeploymentStatus, Orchestrator, OrchestratorConfig, OrchestratorError, RunKind, RunState, TaskOutcome, TimelineKind,
};
use ranorch_core::scheduler::EvictionTimeout;
use ranorch_core::{Catalog, SimTime};

const ARC: &str = include_str!("fixtures/deployment.json");
const OAI72: &str = include_str!("fixtures/deployment_oai72.json");
const SRSRAN: &str = include_str!("fixtures/deployment_srsran_usrp.json");
const IPERF: &str = include_str!("fixtures/test_iperf.json");

fn scenario(text: &str) -> NetworkScenario {
    parse_deployment_file(text, &Catalog::seeded()).unwrap()
}

fn orch(jitter: bool) -> Orchestrator {
    let mut cfg = OrchestratorConfig::default();
    if !jitter {
        cfg.timing = cfg.timing.without_jitter();
    }
    Orchestrator::seeded(cfg)
}

#[test]
fn arc_deploys_under_a_minute_with_warm_cache() {
    let mut o = orch(false);
    let rec = o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    assert_eq!(rec.stack, StackKind::Arc);
    assert!(rec.total_s < 60.0, "{}", rec.total_s);
    assert!((rec.gnb_setup_s() - 18.0).abs() < 1e-9);
    let sum: f64 = rec.breakdown.values().sum();
    assert!((sum - rec.total_s).abs() < 1e-6);
    assert_eq!(o.deployment(1).unwrap().status, DeploymentStatus::Ready);
    o.audit().unwrap();
}

#[test]
fn gnb_setup_tracks_stack_with_jitter() {
    for (text, base) in [(ARC, 18.0), (OAI72, 8.0), (SRSRAN, 10.0)] {
        let mut o = orch(true);
        let rec = o.run_deployment_pipeline(&scenario(text)).unwrap();
        let g = rec.gnb_setup_s();
        assert!((g - base).abs() <= base * 0.15, "{:?} {g}", rec.stack);
    }
}

#[test]
fn concurrent_deploys_interleave() {
    let mut o = orch(false);
    let a = o.deploy(&scenario(ARC)).unwrap();
    let b = o.deploy(&scenario(SRSRAN)).unwrap();
    o.run_until_idle();
    let (ra, rb) = (o.run(a).unwrap(), o.run(b).unwrap());
    assert_eq!((ra.state, rb.state), (RunState::Succeeded, RunState::Succeeded));
    assert_eq!(ra.started_at, rb.started_at);
    assert!(rb.ended_at < ra.ended_at);
    assert!(matches!(o.deploy(&scenario(ARC)), Err(OrchestratorError::AlreadyDeployed(1))));
}

#[test]
fn test_pipeline_skips_attach_and_records() {
    let mut o = orch(false);
    o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    let spec = parse_test_file(IPERF).unwrap();
    let out = o.run_test_pipeline(&spec, None).unwrap();
    assert_eq!(out.run.task("activate_ues").unwrap().outcome, TaskOutcome::Skipped);
    assert_eq!(out.run.task("generate_traffic").unwrap().duration(), SimTime::from_secs(60));
    assert_eq!(out.record.ues.len(), 1);
    // the test offers 25 Mbps
    assert!(out.record.mean_throughput_mbps <= 25.0);
    assert_eq!(o.store.len(), 1);
    let second = o.run_test_pipeline(&spec, None).unwrap();
    assert!(second.verdict.is_some());
}

#[test]
fn test_needs_a_ready_deployment() {
    let mut o = orch(false);
    let spec = parse_test_file(IPERF).unwrap();
    assert!(matches!(o.run_test_pipeline(&spec, None), Err(OrchestratorError::UnknownScenario(1))));
    o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    assert!(matches!(o.run_test_pipeline(&spec, Some(&["nope".into()])), Err(OrchestratorError::UnknownUe(_))));
}

#[test]
fn teardown_releases_everything() {
    let mut o = orch(false);
    o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    let run = o.run_teardown(1).unwrap();
    assert_eq!(run.kind, RunKind::Teardown);
    assert!(o.deployment(1).is_none());
    let free = o.sim.node("gh200-1").unwrap().free_isolated_cores().len();
    assert_eq!(free, 61);
    o.audit().unwrap();
}

#[test]
fn failure_evicts_and_redeploys_in_pool() {
    let mut o = orch(false);
    o.set_eviction_timeout(EvictionTimeout::After(SimTime::from_secs(30)));
    o.run_deployment_pipeline(&scenario(SRSRAN)).unwrap();
    let node = o.deployment(3).unwrap().resolved.target_node.clone();
    let t0 = o.sim.now() + SimTime::from_secs(5);
    o.inject_failure(&node, t0).unwrap();
    o.run_until_idle();
    let tl = o.resilience_timeline(&node).unwrap();
    let off = tl.offsets();
    assert_eq!(off["observed"], 40.0);
    assert_eq!(off["evicted"], 70.0);
    let ready = off["gnb_ready"];
    assert!(ready > 70.0 + 8.5 && ready < 70.0 + 11.5, "{ready}");
    assert!((off["traffic_resumed"] - ready - 30.0).abs() < 1e-6);
    let to = tl.redeployed_to.unwrap();
    assert_ne!(to, node);
    assert_eq!(o.sim.node(&to).unwrap().pool, "worker-mw");
    assert_eq!(o.deployment(3).unwrap().status, DeploymentStatus::Ready);
    o.audit().unwrap();
}

#[test]
fn split72_redeploy_resets_the_ru() {
    let mut o = orch(false);
    o.set_eviction_timeout(EvictionTimeout::After(SimTime::from_secs(30)));
    o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    o.inject_failure("gh200-1", o.sim.now()).unwrap();
    o.run_until_idle();
    let d = o.deployment(1).unwrap();
    assert_eq!(d.ru_resets, 1);
    assert_eq!(d.resolved.target_node, "gh200-2");
    assert!(o.timeline().iter().any(|e| e.kind == TimelineKind::RuReset));
}

#[test]
fn never_timeout_keeps_the_workload() {
    let mut o = orch(false);
    o.set_eviction_timeout(EvictionTimeout::Never);
    o.run_deployment_pipeline(&scenario(SRSRAN)).unwrap();
    let node = o.deployment(3).unwrap().resolved.target_node.clone();
    o.inject_failure(&node, o.sim.now()).unwrap();
    o.run_until_idle();
    assert_eq!(o.deployment(3).unwrap().status, DeploymentStatus::Disrupted);
    assert!(o.resilience_timeline(&node).unwrap().evicted_at.is_none());
}

#[test]
fn no_capacity_left_marks_failed() {
    let mut o = orch(false);
    o.set_eviction_timeout(EvictionTimeout::After(SimTime::from_secs(30)));
    o.run_deployment_pipeline(&scenario(SRSRAN)).unwrap();
    let node = o.deployment(3).unwrap().resolved.target_node.clone();
    let other = if node == "microway-1" { "microway-2" } else { "microway-1" };
    o.inject_failure(other, o.sim.now()).unwrap();
    o.inject_failure(&node, o.sim.now()).unwrap();
    o.run_until_idle();
    assert_eq!(o.deployment(3).unwrap().status, DeploymentStatus::Failed);
    o.audit().unwrap();
}

#[test]
fn relabel_moves_workloads_within_their_pool() {
    let mut o = orch(false);
    o.run_deployment_pipeline(&scenario(ARC)).unwrap();
    assert!(o.relabel_node("gh200-1", "worker-mw").unwrap());
    o.run_until_idle();
    let d = o.deployment(1).unwrap();
    assert_eq!(d.resolved.target_node, "gh200-2");
    assert_eq!(d.resolved.pool, "worker-gh");
    assert_eq!(o.sim.node("gh200-1").unwrap().pool, "worker-mw");
    assert!(!o.relabel_node("gh200-1", "worker-mw").unwrap());
    o.audit().unwrap();
}

#[test]
fn shared_load_has_no_effect_by_default() {
    let spec = parse_test_file(IPERF).unwrap();
    let run = |load: bool| {
        let mut o = orch(false);
        o.run_deployment_pipeline(&scenario(ARC)).unwrap();
        if load {
            o.sim.inject_load("gh200-1", LoadKind::SharedCores, SimTime::from_secs(600)).unwrap();
        }
        o.run_test_pipeline(&spec, None).unwrap().record.mean_throughput_mbps
    };
    assert_eq!(run(false), run(true));
}

#[test]
fn same_seed_same_log() {
    let go = || {
        let mut o = orch(true);
        o.run_deployment_pipeline(&scenario(ARC)).unwrap();
        o.run_test_pipeline(&parse_test_file(IPERF).unwrap(), None).unwrap();
        (o.sim.event_log_jsonl(), o.ledger_jsonl())
    };
    assert_eq!(go(), go());
}
