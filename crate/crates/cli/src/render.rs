//! Human-readable tables. Nothing here is used in `--json` mode.

use std::fmt::Write as _;

use ranorch_core::agent::AgentMetrics;
use ranorch_core::pipeline::{DeploymentRecord, PipelineRun, ResilienceTimeline, TestOutcome, TimelineEntry};
use ranorch_core::telemetry::TestRecord;
use serde::Serialize;

use crate::commands::{DeploymentView, NodeView};

/// Serde name of a unit enum, e.g. `worker_gh` or `ready`.
pub fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => "?".into(),
    }
}

pub fn task_table(out: &mut String, run: &PipelineRun) {
    let origin = run.tasks.first().map_or(run.started_at, |t| t.start);
    let _ = writeln!(out, "  {:<20} {:>9} {:>11}  outcome", "task", "start_s", "duration_s");
    for t in &run.tasks {
        let start = t.start.saturating_sub(origin).as_secs_f64();
        let _ = writeln!(out, "  {:<20} {:>9.3} {:>11.3}  {}", t.task, start, t.duration().as_secs_f64(), label(&t.outcome));
    }
    let _ = writeln!(out, "  {:<20} {:>9} {:>11.3}", "total", "", run.total().as_secs_f64());
}

pub fn deployment(out: &mut String, rec: &DeploymentRecord) {
    let _ = writeln!(out, "deployment {} ({}) on {} [{}]", rec.scenario_id, label(&rec.stack), rec.node, rec.pool);
    let origin = rec.tasks.first().map(|t| t.start).unwrap_or_default();
    let _ = writeln!(out, "  {:<20} {:>9} {:>11}", "task", "start_s", "duration_s");
    for t in &rec.tasks {
        let _ = writeln!(out, "  {:<20} {:>9.3} {:>11.3}", t.task, t.start.saturating_sub(origin).as_secs_f64(), t.duration().as_secs_f64());
    }
    let _ = writeln!(out, "  {:<20} {:>9} {:>11.3}", "total", "", rec.total_s);
}

pub fn record(out: &mut String, r: &TestRecord) {
    let _ = writeln!(out, "  {:<22} {:<10} {:<4} {:>9} {:>9} {:>9} {:>8}", "ue", "class", "dir", "mean", "min", "max", "rtt_ms");
    for u in &r.ues {
        let s = &u.summary;
        let _ = writeln!(
            out,
            "  {:<22} {:<10} {:<4} {:>9.1} {:>9.1} {:>9.1} {:>8.1}",
            u.serial,
            u.ue_class,
            u.direction.as_str(),
            s.mean_mbps,
            s.min_mbps,
            s.max_mbps,
            s.mean_rtt_ms
        );
    }
    let _ = writeln!(out, "  aggregate {:.1} Mbps, rtt {:.1} ms", r.mean_throughput_mbps, r.mean_rtt_ms);
}

pub fn test(out: &mut String, t: &TestOutcome) {
    let _ = writeln!(out, "test run {} on scenario {} (record {})", t.run.id, t.run.scenario_id, t.record.id);
    task_table(out, &t.run);
    record(out, &t.record);
    if let Some(v) = &t.verdict {
        let _ = writeln!(out, "  baseline: {} ({:.1} vs {:.1} Mbps over {} runs)", label(&v.status), v.latest_mean_mbps, v.history_mean_mbps, v.history_records);
    }
}

pub fn metrics(out: &mut String, backend: &str, m: &AgentMetrics) {
    let verdict = if m.success { "validated".to_owned() } else { format!("failed ({})", m.failure_reason.as_ref().map(label).unwrap_or_default()) };
    let _ = writeln!(out, "{verdict} via {backend} in {} iterations, {:.1} s", m.iterations, m.runtime_s);
}

pub fn nodes(out: &mut String, nodes: &[NodeView]) {
    let _ = writeln!(out, "{:<12} {:<10} {:<12} {:<13} {:<9} {:>9} {:>5} {:>7}  workloads", "node", "family", "pool", "state", "ptp", "iso_free", "gpu", "vf");
    for n in nodes {
        let (used, enabled) = n.nics.iter().fold((0, 0), |(u, e), nic| (u + nic.allocated, e + nic.enabled));
        let state = if n.reconfiguring { format!("{}*", label(&n.state)) } else { label(&n.state) };
        let _ = writeln!(
            out,
            "{:<12} {:<10} {:<12} {:<13} {:<9} {:>9} {:>5} {:>7}  {}",
            n.id,
            n.family,
            n.pool,
            state,
            label(&n.ptp),
            n.isolated_free,
            format!("{}/{}", n.gpu_slots_used, n.gpu_slots_total),
            format!("{used}/{enabled}"),
            n.workloads.iter().cloned().collect::<Vec<_>>().join(",")
        );
    }
}

pub fn deployments(out: &mut String, ds: &[DeploymentView]) {
    if ds.is_empty() {
        let _ = writeln!(out, "no deployments");
        return;
    }
    let _ = writeln!(out, "{:<6} {:<11} {:<12} {:<12} {:<12} {:>6}", "id", "stack", "node", "pool", "status", "tests");
    for d in ds {
        let _ = writeln!(out, "{:<6} {:<11} {:<12} {:<12} {:<12} {:>6}", d.scenario_id, label(&d.stack), d.node, d.pool, label(&d.status), d.tests_run);
    }
}

pub fn timeline(out: &mut String, tl: &ResilienceTimeline, events: &[TimelineEntry]) {
    let _ = writeln!(out, "failure of {} at {:.1} s", tl.node, tl.failed_at.as_secs_f64());
    for e in events {
        let at = e.time.saturating_sub(tl.failed_at).as_secs_f64();
        let scenario = e.scenario_id.map(|s| format!("scenario {s}")).unwrap_or_default();
        let _ = writeln!(out, "  +{at:>7.1} s  {:<17} {:<12} {scenario}", label(&e.kind), e.node);
    }
    match (tl.gnb_ready_at, tl.traffic_resumed_at) {
        (Some(g), Some(t)) => {
            let _ = writeln!(out, "  traffic resumed {:.1} s after the gNB came back", t.saturating_sub(g).as_secs_f64());
        }
        _ if tl.evicted_at.is_none() => {
            let _ = writeln!(out, "  no workload was evicted within the horizon");
        }
        _ => {
            let _ = writeln!(out, "  service not restored within the horizon");
        }
    }
}
