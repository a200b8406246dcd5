use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use ranorch_core::agent::{compile_intent, convergent_script, run_intent, Budgets, Mode, ScriptedBackend};
use ranorch_core::config::{parse_deployment_file, parse_test_file};
use ranorch_core::pipeline::{Orchestrator, OrchestratorConfig};
use ranorch_core::scheduler::EvictionTimeout;
use ranorch_core::{Catalog, SimTime};
use serde_json::{json, Value};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ranorch"));
    for var in ["RANORCH_SEED", "RANORCH_CONFIG", "RANORCH_STORE", "RANORCH_PACE", "RANORCH_LLM_URL"] {
        c.env_remove(var);
    }
    c
}

fn ranorch(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parses stdout, insisting on exactly one JSON document.
fn one_doc(out: &Output) -> Value {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let docs: Vec<Value> = serde_json::Deserializer::from_str(&text).into_iter().collect::<Result<_, _>>().expect("stdout is JSON");
    assert_eq!(docs.len(), 1, "stdout: {text}");
    docs.into_iter().next().unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"network_scenario": {"id": "one"}}"#).unwrap();
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["run", "--deploy", arg(&arc)], 0),
        (vec!["intent", "deploy a 5G gNB with OAI and NVIDIA ARC", "--backend", "scripted", "--execute"], 0),
        (vec!["intent", "   "], 1),
        (vec!["intent", "deploy oai", "--max-iterations", "1", "--backend", "scripted", "--adversarial"], 1),
        (vec!["intent", "deploy oai", "--backend", "remote", "--llm-url", "http://127.0.0.1:9/v1/chat/completions"], 3),
        (vec!["intent", "deploy oai", "--backend", "remote"], 3),
        (vec!["run", "--deploy", arg(&bad)], 1),
        (vec!["run", "--deploy", "/nonexistent/file.json"], 1),
        (vec!["run"], 1),
        (vec!["run", "--test", arg(&test)], 2),
        (vec!["cluster", "nodes"], 0),
        (vec!["cluster", "relabel", "gh200-1", "nowhere"], 3),
        (vec!["cluster", "relabel", "ghost-9", "worker-gh"], 3),
        (vec!["cluster", "fail", "ghost-9"], 3),
        (vec!["cluster", "fail", "microway-1", "--evict-timeout", "soon"], 1),
        (vec!["no-such-command"], 1),
        (vec!["--help"], 0),
    ];
    for (args, want) in cases {
        let out = ranorch(&args);
        assert_eq!(out.status.code(), Some(want), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"network_scenario": {"id": "one"}}"#).unwrap();
    let out = ranorch(&["--json", "run", "--deploy", arg(&bad)]);
    let doc = one_doc(&out);
    assert_eq!(doc["error"]["path"], "network_scenario.id");
    assert_eq!(doc["error"]["exit_code"], 1);
}

#[test]
fn json_mode_prints_exactly_one_document() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["--json", "cluster", "nodes"],
        vec!["--json", "run", "--deploy", arg(&arc), "--test", arg(&test)],
        vec!["--json", "cluster", "fail", "microway-1", "--evict-timeout", "30"],
        vec!["--json", "intent", "run an iperf test", "--mode", "test"],
        vec!["--json", "intent", ""],
        vec!["--json", "cluster", "relabel", "gh200-1", "nowhere"],
        vec!["--json", "status"],
        vec!["--json", "bogus"],
        vec!["--json", "corpus", "--reps", "1"],
    ];
    for args in runs {
        let out = ranorch(&args);
        let doc = one_doc(&out);
        assert_eq!(doc.get("error").is_some(), out.status.code() != Some(0), "{args:?}");
    }
}

#[test]
fn run_matches_the_library() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let out = ranorch(&["--json", "--seed", "11", "run", "--deploy", arg(&arc), "--test", arg(&test)]);
    assert_eq!(out.status.code(), Some(0));
    let doc = one_doc(&out);

    let mut o = Orchestrator::seeded(OrchestratorConfig { seed: 11, ..OrchestratorConfig::default() });
    let scenario = parse_deployment_file(&std::fs::read_to_string(&arc).unwrap(), &Catalog::seeded()).unwrap();
    let rec = o.run_deployment_pipeline(&scenario).unwrap();
    let outcome = o.run_test_pipeline(&parse_test_file(&std::fs::read_to_string(&test).unwrap()).unwrap(), None).unwrap();
    assert_eq!(doc["deployments"], json!([rec]));
    assert_eq!(doc["tests"], json!([outcome]));
}

#[test]
fn failure_timeline_matches_the_library() {
    let out = ranorch(&["--json", "cluster", "fail", "microway-1", "--detect-delay", "40", "--evict-timeout", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = one_doc(&out);

    let mut o = Orchestrator::seeded(OrchestratorConfig::default());
    let scenario = parse_deployment_file(include_str!("../assets/srsran_usrp.json"), &Catalog::seeded()).unwrap();
    let rec = o.run_deployment_pipeline(&scenario).unwrap();
    assert_eq!(rec.node, "microway-1");
    o.sim.set_detection_delay(SimTime::from_secs(40));
    o.set_eviction_timeout(EvictionTimeout::After(SimTime::from_secs(30)));
    let t0 = o.sim.now();
    o.inject_failure("microway-1", t0).unwrap();
    o.run_until(t0 + SimTime::from_secs(600));
    let tl = o.resilience_timeline("microway-1").unwrap();
    assert_eq!(doc["deployment"], json!(rec));
    assert_eq!(doc["timeline"], json!(tl));
    assert_eq!(doc["offsets"]["observed"], 40.0);
    assert_eq!(doc["offsets"]["evicted"], 70.0);
}

#[test]
fn intent_matches_the_library() {
    let text = "deploy a 5G gNB with OAI and NVIDIA ARC";
    let doc = one_doc(&ranorch(&["--json", "intent", text]));
    let cat = Catalog::seeded();
    let mut backend = ScriptedBackend::new(convergent_script(&compile_intent(text, Mode::Deploy)));
    let out = run_intent(&cat, text, Mode::Deploy, &mut backend, Budgets::default());
    let config: Value = serde_json::from_str(&out.config.unwrap().to_json()).unwrap();
    assert_eq!(doc["config"], config);
    assert_eq!(doc["metrics"], json!(out.metrics));
}

#[test]
fn seed_reproduces_bytes() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let go = |seed: &str| ranorch(&["--json", "--seed", seed, "run", "--deploy", arg(&arc), "--test", arg(&test)]).stdout;
    assert_eq!(go("3"), go("3"));
    assert_ne!(go("3"), go("4"));
    let fail = || ranorch(&["--json", "--seed", "9", "cluster", "fail", "gh200-1", "--evict-timeout", "30"]).stdout;
    assert_eq!(fail(), fail());
}

#[test]
fn flag_beats_env_beats_config_file() {
    let arc = fixture("deployment.json");
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("settings.json");
    std::fs::write(&cfg, r#"{"seed": 5}"#).unwrap();
    let run = |extra: &[&str], env: Option<&str>| {
        let mut c = bin();
        c.args(["--json", "--config", arg(&cfg)]).args(extra).args(["run", "--deploy", arg(&arc)]);
        if let Some(v) = env {
            c.env("RANORCH_SEED", v);
        }
        c.output().unwrap().stdout
    };
    let plain = |seed: &str| ranorch(&["--json", "--seed", seed, "run", "--deploy", arg(&arc)]).stdout;
    assert_eq!(run(&[], None), plain("5"));
    assert_eq!(run(&[], Some("6")), plain("6"));
    assert_eq!(run(&["--seed", "7"], Some("6")), plain("7"));
    assert_ne!(plain("5"), plain("6"));
}

#[test]
fn unknown_settings_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("settings.json");
    std::fs::write(&cfg, r#"{"sed": 5}"#).unwrap();
    assert_eq!(ranorch(&["--config", arg(&cfg), "status"]).status.code(), Some(1));
}

#[test]
fn pacing_does_not_change_results() {
    let arc = fixture("deployment.json");
    let fast = ranorch(&["--json", "run", "--deploy", arg(&arc)]).stdout;
    let paced = ranorch(&["--json", "--pace", "2000", "run", "--deploy", arg(&arc)]).stdout;
    assert_eq!(fast, paced);
}

#[test]
fn serve_keeps_one_simulation() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let script = format!(
        "run --deploy '{}'\nrun --test '{}'\nbogus\n\n# comment\nstatus\ncluster relabel gh200-1 worker-mw --wait\nstatus\nquit\nstatus\n",
        arc.display(),
        test.display()
    );
    let mut child = bin().args(["--json", "serve"]).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(script.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<Value> = String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 6, "{lines:?}");
    assert_eq!(lines[0]["deployments"][0]["scenario_id"], 1);
    assert_eq!(lines[1]["tests"][0]["record"]["scenario_id"], 1);
    assert_eq!(lines[2]["error"]["exit_code"], 1);
    assert_eq!(lines[3]["deployments"][0]["status"], "ready");
    assert_eq!(lines[4]["changed"], true);
    // the ARC gNB left gh200-1 and came back on its peer
    assert_eq!(lines[5]["deployments"][0]["node"], "gh200-2");
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let arc = fixture("deployment.json");
    let args = ["ranorch", "--json", "run", "--deploy", arg(&arc)];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = ranorch_cli::run_cli(args, &mut std::io::empty(), &mut out, &mut err);
    assert_eq!(code, 0);
    assert_eq!(out, ranorch(&args[1..]).stdout);
}

#[test]
fn store_persists_and_exports() {
    let arc = fixture("deployment.json");
    let test = fixture("test_iperf.json");
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let csv = dir.path().join("out.csv");
    for _ in 0..2 {
        let out = ranorch(&["--store", arg(&store), "run", "--deploy", arg(&arc), "--test", arg(&test)]);
        assert_eq!(out.status.code(), Some(0));
    }
    let doc = one_doc(&ranorch(&["--json", "--store", arg(&store), "cluster", "report", "--stack", "arc", "--csv", arg(&csv)]));
    assert_eq!(doc["records"].as_array().unwrap().len(), 2);
    let rows = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(rows, 1 + 2 * 60);
}

#[test]
fn add_node_provisions_into_its_pool() {
    let doc = one_doc(&ranorch(&["--json", "cluster", "add", "--like", "gh200-1", "--id", "gh200-3", "--pool", "worker-gh", "--wait"]));
    assert_eq!(doc["node"]["state"], "ready");
    assert_eq!(doc["node"]["pool"], "worker-gh");
    assert_eq!(doc["ready_at_s"], 2400.0);
    assert_eq!(ranorch(&["cluster", "add", "--like", "gh200-1", "--id", "x", "--pool", "nowhere"]).status.code(), Some(3));
}

#[test]
fn human_output_keeps_errors_off_stdout() {
    let out = ranorch(&["cluster", "relabel", "gh200-1", "nowhere"]);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown pool"));
    let table = String::from_utf8(ranorch(&["run", "--deploy", arg(&fixture("deployment.json"))]).stdout).unwrap();
    assert!(table.contains("gnb_setup") && table.contains("total"));
}
