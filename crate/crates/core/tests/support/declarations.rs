//! Random edits to a declared state and the convergence check run after
//! each one.
#![allow(dead_code)]

use proptest::prelude::*;
use ranorch_core::config::{parse_deployment_file, parse_test_file, NetworkScenario};
use ranorch_core::pipeline::{DeclaredState, DeploymentStatus, Orchestrator, OrchestratorConfig, Reconciler};
use ranorch_core::Catalog;

const ARC: &str = include_str!("../fixtures/deployment.json");
const OAI72: &str = include_str!("../fixtures/deployment_oai72.json");
const SRSRAN: &str = include_str!("../fixtures/deployment_srsran_usrp.json");
const IPERF: &str = include_str!("../fixtures/test_iperf.json");

fn scenario(text: &str) -> NetworkScenario {
    parse_deployment_file(text, &Catalog::seeded()).unwrap()
}

const RUS: [(&str, Option<i64>); 6] = [
    ("foxconn", Some(660)),
    ("foxconn", Some(640)),
    ("usrp_x310", Some(640)),
    ("usrp_x410", Some(660)),
    ("rusim", Some(0)),
    ("foxconn", Some(999)),
];

#[derive(Debug, Clone)]
pub enum Mutation {
    Put { id: u32, stack: usize, ru: usize },
    Remove(u32),
    PutTest { key: u8, scenario: u32, bandwidth: u16 },
    RemoveTest(u8),
}

pub fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        4 => (1u32..6, 0usize..4, 0..RUS.len()).prop_map(|(id, stack, ru)| Mutation::Put { id, stack, ru }),
        2 => (1u32..6).prop_map(Mutation::Remove),
        2 => (0u8..3, 1u32..6, 1u16..500).prop_map(|(key, scenario, bandwidth)| Mutation::PutTest { key, scenario, bandwidth }),
        1 => (0u8..3).prop_map(Mutation::RemoveTest),
    ]
}

/// Four stack templates; the RU choice may make a declaration unresolvable,
/// which is fine: failures must still converge.
pub fn build(id: u32, stack: usize, ru: usize) -> NetworkScenario {
    let mut s = scenario([ARC, OAI72, SRSRAN, ARC][stack]);
    s.id = id;
    if stack == 3 {
        s.du_low.name = "none".into();
        s.du_low.config_file = None;
    }
    let (name, loc) = RUS[ru];
    let compatible = Catalog::seeded().validate(&{
        let mut sel = s.selection();
        sel.insert(ranorch_core::Role::Ru, name.into());
        sel
    });
    if compatible.is_ok_and(|r| r.is_valid()) {
        s.ru.name = name.into();
    }
    s.ru.location = loc;
    s
}

/// Applies each edit, converges with at most two passes and checks the
/// plan is empty, a further pass is a no-op, and the running state matches
/// the declaration minus recorded failures.
pub fn check_convergence(mutations: &[Mutation]) -> Result<(), String> {
    let mut cfg = OrchestratorConfig::default();
    cfg.timing = cfg.timing.without_jitter();
    let mut o = Orchestrator::seeded(cfg);
    let mut r = Reconciler::new();
    let mut d = DeclaredState::default();
    let base = parse_test_file(IPERF).unwrap();
    for m in mutations {
        match *m {
            Mutation::Put { id, stack, ru } => {
                d.scenarios.insert(id, build(id, stack, ru));
            }
            Mutation::Remove(id) => {
                d.scenarios.remove(&id);
            }
            Mutation::PutTest { key, scenario, bandwidth } => {
                let mut t = base.clone();
                t.scenario_id = scenario;
                t.ue_specifications[0].bandwidth_mbps = bandwidth as f64;
                t.ue_specifications[0].duration = 10;
                d.tests.insert(format!("t{key}"), t);
            }
            Mutation::RemoveTest(key) => {
                d.tests.remove(&format!("t{key}"));
            }
        }
        let report = r.converge(&mut o, &d, 2);
        if report.passes > 2 {
            return Err(format!("{} passes", report.passes));
        }
        let plan = r.plan(&o, &d);
        if !plan.is_empty() {
            return Err(format!("plan after 2 passes: {plan:?}"));
        }
        let again = r.converge(&mut o, &d, 2);
        if again.passes != 0 {
            return Err(format!("a converged state took {} more passes", again.passes));
        }
        let failed = r.failed_scenarios(&d);
        for (id, s) in &d.scenarios {
            let dep = o.deployment(*id);
            let ok = if failed.contains(id) {
                dep.is_none_or(|x| x.status == DeploymentStatus::Failed || x.scenario != *s)
            } else {
                dep.is_some_and(|x| x.scenario == *s && x.status == DeploymentStatus::Ready)
            };
            if !ok {
                return Err(format!("scenario {id} does not match its declaration"));
            }
        }
        if let Some(dep) = o.deployments().find(|dep| !d.scenarios.contains_key(&dep.scenario.id)) {
            return Err(format!("scenario {} runs without a declaration", dep.scenario.id));
        }
        o.audit()?;
    }
    Ok(())
}
