use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{run_intent, BackendAdapter, Budgets, Mode};
use crate::catalog::Catalog;

/// Reconstructed evaluation prompts with what a correct answer must hold.
pub const SEED_CORPUS: &str = include_str!("../../assets/corpus.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusEntry {
    pub prompt: String,
    pub mode: Mode,
    /// Field → required value. A deployable config that misses any of
    /// these still counts as a failure.
    pub predicate: BTreeMap<String, Value>,
}

impl CorpusEntry {
    pub fn load(text: &str) -> Result<Vec<CorpusEntry>, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn satisfied_by(&self, fields: &BTreeMap<String, Value>) -> bool {
        self.predicate.iter().all(|(k, want)| match (fields.get(k), want) {
            (Some(Value::Number(a)), Value::Number(b)) => a.as_f64() == b.as_f64(),
            (Some(got), want) => got == want,
            (None, _) => false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptResult {
    pub prompt: String,
    pub runs: u32,
    pub successes: u32,
    /// Validated but not what was asked for.
    pub wrong: u32,
    pub mean_iterations: f64,
    pub mean_runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub backend: String,
    pub prompts: Vec<PromptResult>,
    pub runs: u32,
    pub success_rate: f64,
    /// Over successful runs only.
    pub iterations_mean: f64,
    pub iterations_p50: f64,
    pub iterations_p90: f64,
    pub runtime_mean_s: f64,
    pub runtime_p50_s: f64,
    pub runtime_p90_s: f64,
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank.min(sorted.len() - 1)]
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl CorpusReport {
    /// Success rate, runtime and iterations, one row per backend.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<24} {:>9} {:>12} {:>12} {:>11}", "backend", "success", "runtime_s", "runtime_p90", "iterations");
        let _ = writeln!(
            s,
            "{:<24} {:>8.1}% {:>12.2} {:>12.2} {:>11.2}",
            self.backend,
            self.success_rate * 100.0,
            self.runtime_mean_s,
            self.runtime_p90_s,
            self.iterations_mean
        );
        s
    }
}

/// Runs every prompt `repetitions` times; `backend_for` supplies a fresh
/// backend per run.
pub fn evaluate_corpus(
    catalog: &Catalog,
    corpus: &[CorpusEntry],
    repetitions: u32,
    budgets: Budgets,
    backend_for: &mut dyn FnMut(&CorpusEntry, u32) -> Box<dyn BackendAdapter>,
) -> CorpusReport {
    let mut prompts = Vec::new();
    let mut iters = Vec::new();
    let mut times = Vec::new();
    let mut name = String::new();
    let mut total_ok = 0;
    for entry in corpus {
        let (mut ok, mut wrong) = (0, 0);
        let (mut it, mut rt) = (Vec::new(), Vec::new());
        for rep in 0..repetitions {
            let mut backend = backend_for(entry, rep);
            name = backend.name().to_owned();
            let out = run_intent(catalog, &entry.prompt, entry.mode, backend.as_mut(), budgets);
            match &out.config {
                Some(cfg) if entry.satisfied_by(&cfg.fields()) => {
                    ok += 1;
                    it.push(out.metrics.iterations as f64);
                    rt.push(out.metrics.runtime_s);
                }
                Some(_) => wrong += 1,
                None => {}
            }
        }
        total_ok += ok;
        prompts.push(PromptResult { prompt: entry.prompt.clone(), runs: repetitions, successes: ok, wrong, mean_iterations: mean(&it), mean_runtime_s: mean(&rt) });
        iters.extend(it);
        times.extend(rt);
    }
    iters.sort_by(f64::total_cmp);
    times.sort_by(f64::total_cmp);
    let runs = corpus.len() as u32 * repetitions;
    CorpusReport {
        backend: name,
        prompts,
        runs,
        success_rate: if runs == 0 { 0.0 } else { total_ok as f64 / runs as f64 },
        iterations_mean: mean(&iters),
        iterations_p50: percentile(&iters, 0.5),
        iterations_p90: percentile(&iters, 0.9),
        runtime_mean_s: mean(&times),
        runtime_p50_s: percentile(&times, 0.5),
        runtime_p90_s: percentile(&times, 0.9),
    }
}
