use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::baseline::{compare_baseline, RegressionVerdict};
use super::record::{RecordFilter, TestRecord};
use super::TelemetryError;

const DAY_MS: u64 = 86_400_000;
const INDEX: &str = "index.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    id: u64,
    file: String,
    scenario_id: u32,
    stack: String,
    started_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Index {
    next_id: u64,
    records: Vec<IndexEntry>,
}

/// Append-only record store: one JSON-lines file per simulated day plus an
/// index. Without a directory it keeps records in memory only.
#[derive(Debug, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    index: Index,
    records: Vec<TestRecord>,
}

fn storage<E: std::fmt::Display>(e: E) -> TelemetryError {
    TelemetryError::Storage(e.to_string())
}

impl Store {
    pub fn in_memory() -> Self {
        Self { index: Index { next_id: 1, records: Vec::new() }, ..Self::default() }
    }

    /// Opens (or creates) a store directory and loads every record.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, TelemetryError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(storage)?;
        let index_path = dir.join(INDEX);
        let index: Index = if index_path.exists() {
            serde_json::from_str(&fs::read_to_string(&index_path).map_err(storage)?).map_err(storage)?
        } else {
            Index { next_id: 1, records: Vec::new() }
        };
        let mut files: Vec<&str> = index.records.iter().map(|e| e.file.as_str()).collect();
        files.dedup();
        let mut records = Vec::new();
        for f in files {
            let reader = BufReader::new(File::open(dir.join(f)).map_err(storage)?);
            for line in reader.lines() {
                let line = line.map_err(storage)?;
                if !line.trim().is_empty() {
                    records.push(serde_json::from_str::<TestRecord>(&line).map_err(storage)?);
                }
            }
        }
        records.sort_by_key(|r| r.id);
        records.dedup_by_key(|r| r.id);
        if records.len() != index.records.len() {
            return Err(TelemetryError::Storage(format!("index lists {} records, files hold {}", index.records.len(), records.len())));
        }
        Ok(Self { dir: Some(dir), index, records })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Assigns the next id, appends, and returns the id.
    pub fn record(&mut self, mut test: TestRecord) -> Result<u64, TelemetryError> {
        let id = self.index.next_id.max(1);
        test.id = id;
        let file = format!("day-{:05}.jsonl", test.started_at.as_millis() / DAY_MS);
        if let Some(dir) = &self.dir {
            let line = serde_json::to_string(&test).map_err(storage)?;
            let mut f = OpenOptions::new().create(true).append(true).open(dir.join(&file)).map_err(storage)?;
            writeln!(f, "{line}").map_err(storage)?;
        }
        self.index.next_id = id + 1;
        self.index.records.push(IndexEntry { id, file, scenario_id: test.scenario_id, stack: test.stack.clone(), started_at: test.started_at.as_millis() });
        if let Some(dir) = &self.dir {
            let tmp = dir.join("index.json.tmp");
            fs::write(&tmp, serde_json::to_string_pretty(&self.index).map_err(storage)?).map_err(storage)?;
            fs::rename(&tmp, dir.join(INDEX)).map_err(storage)?;
        }
        self.records.push(test);
        Ok(id)
    }

    pub fn get(&self, id: u64) -> Option<&TestRecord> {
        self.records.binary_search_by_key(&id, |r| r.id).ok().map(|i| &self.records[i])
    }

    pub fn query(&self, filter: &RecordFilter) -> Vec<TestRecord> {
        self.records.iter().filter(|r| filter.matches(r)).cloned().collect()
    }

    /// Compares `latest` against matching history, excluding itself.
    pub fn compare_baseline(&self, latest: &TestRecord, filter: &RecordFilter, threshold: f64) -> Result<RegressionVerdict, TelemetryError> {
        let history: Vec<TestRecord> = self.records.iter().filter(|r| r.id != latest.id && filter.matches(r)).cloned().collect();
        compare_baseline(latest, &history, threshold)
    }

    /// One CSV row per sample.
    pub fn export_csv<W: Write>(records: &[TestRecord], out: W) -> Result<(), TelemetryError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["record_id", "scenario_id", "stack", "node", "ue_serial", "direction", "t_s", "throughput_mbps", "rtt_ms"]).map_err(storage)?;
        for r in records {
            for ue in &r.ues {
                for (thr, rtt) in ue.series.throughput_mbps.iter().zip(&ue.series.rtt_ms) {
                    w.write_record([
                        r.id.to_string(),
                        r.scenario_id.to_string(),
                        r.stack.clone(),
                        r.node.clone(),
                        ue.serial.clone(),
                        ue.direction.as_str().to_owned(),
                        format!("{:.3}", thr.t.as_secs_f64()),
                        format!("{:.3}", thr.value),
                        format!("{:.3}", rtt.value),
                    ])
                    .map_err(storage)?;
                }
            }
        }
        w.flush().map_err(storage)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Protocol, TestType};
    use crate::telemetry::{synthesize_performance, Direction, PerformanceModel, ProfileKey, SeriesSummary, Shaping, UeResult};
    use crate::time::SimTime;

    fn record(scenario: u32, stack: &str, at: u64, seed: u64) -> TestRecord {
        let m = PerformanceModel::default();
        let key = ProfileKey::new("gh200", stack, "sierra", Direction::Dl);
        let series = synthesize_performance(&m, &key, 10.0, seed, Shaping::full()).unwrap();
        let ue = UeResult {
            serial: "mj06k2su".into(),
            ue_class: "sierra".into(),
            direction: Direction::Dl,
            test_type: TestType::Iperf,
            protocol: Protocol::Udp,
            offered_mbps: 1000.0,
            summary: SeriesSummary::of(&series),
            series,
        };
        TestRecord::new(scenario, stack, "gh200-1", "gh200", SimTime::from_secs(at), SimTime::from_secs(at + 10), vec![ue])
    }

    #[test]
    fn empty_store_queries_empty() {
        assert!(Store::in_memory().query(&RecordFilter::default()).is_empty());
    }

    #[test]
    fn survives_restart_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        let ids: Vec<u64> = (0..5).map(|i| s.record(record(1 + i % 2, "arc", i as u64 * 50_000, i as u64)).unwrap()).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5]);
        let before = s.query(&RecordFilter::default());
        drop(s);
        let again = Store::open(dir.path()).unwrap();
        assert_eq!(again.query(&RecordFilter::default()), before);
        assert_eq!(again.query(&RecordFilter::scenario(2)).len(), 2);
        assert!(fs::read_dir(dir.path()).unwrap().count() >= 3);
    }

    #[test]
    fn filter_by_stack_matches_linear_scan() {
        let mut s = Store::in_memory();
        let stacks = ["arc", "oai72", "oai-sdr"];
        let mut all = Vec::new();
        for i in 0..100u64 {
            let r = record((i % 7) as u32 + 1, stacks[(i % 3) as usize], i * 100, i);
            let id = s.record(r.clone()).unwrap();
            all.push(TestRecord { id, ..r });
        }
        let f = RecordFilter { stack: Some("oai72".into()), ..RecordFilter::default() };
        let expected: Vec<_> = all.iter().filter(|r| r.stack == "oai72").cloned().collect();
        assert_eq!(s.query(&f), expected);
    }

    #[test]
    fn csv_export_has_a_row_per_sample() {
        let r = record(1, "arc", 0, 3);
        let mut buf = Vec::new();
        Store::export_csv(&[r], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 11);
    }
}
