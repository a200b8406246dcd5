use std::collections::BTreeMap;
use std::fmt;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TelemetryError;
use crate::rng;
use crate::time::SimTime;

pub const SEED_PERFORMANCE: &str = include_str!("../../assets/performance.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Dl,
    Ul,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Dl => "dl",
            Direction::Ul => "ul",
        }
    }
}

/// What a throughput profile is looked up by.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProfileKey {
    /// Node family, e.g. "gh200".
    pub family: String,
    /// Stack label, e.g. "arc".
    pub stack: String,
    pub ue_class: String,
    pub direction: Direction,
}

impl ProfileKey {
    pub fn new(family: &str, stack: &str, ue_class: &str, direction: Direction) -> Self {
        Self { family: family.into(), stack: stack.into(), ue_class: ue_class.into(), direction }
    }

    /// Lookup order: exact, any family, then any family and UE class.
    fn candidates(&self) -> [String; 3] {
        let d = self.direction.as_str();
        [
            format!("{}-{}/{}/{d}", self.family, self.stack, self.ue_class),
            format!("*-{}/{}/{d}", self.stack, self.ue_class),
            format!("*-{}/*/{d}", self.stack),
        ]
    }
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}/{}/{}", self.family, self.stack, self.ue_class, self.direction.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputProfile {
    pub mean_mbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_mbps: Option<f64>,
    /// Samples are clamped to [0, cap].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap_mbps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatencyProfile {
    pub mean_ms: f64,
    pub std_ms: f64,
}

/// Resolved distribution parameters for one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub mean: f64,
    pub std: f64,
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerformanceModel {
    /// std as a fraction of the mean when a profile gives none.
    pub default_std_fraction: f64,
    pub sample_interval_s: f64,
    /// "family-stack/ue_class/direction"; `*` matches any family or class.
    pub profiles: BTreeMap<String, ThroughputProfile>,
    pub latency: LatencyProfile,
    #[serde(default)]
    pub latency_per_stack: BTreeMap<String, LatencyProfile>,
    /// UE hardware model → UE class.
    #[serde(default)]
    pub ue_classes: BTreeMap<String, String>,
    pub default_ue_class: String,
    /// RU name → UE class of the emulated UEs behind it.
    #[serde(default)]
    pub emulated_ru_class: BTreeMap<String, String>,
    /// Fractional throughput loss while shared-core load overlaps a test.
    /// Zero reproduces the measured null effect; non-zero is for what-if runs.
    #[serde(default)]
    pub coexistence_penalty: f64,
}

impl Default for PerformanceModel {
    fn default() -> Self {
        Self::from_json(SEED_PERFORMANCE).expect("bundled performance model is valid")
    }
}

impl PerformanceModel {
    pub fn from_json(text: &str) -> Result<Self, TelemetryError> {
        let m: PerformanceModel = serde_json::from_str(text).map_err(|e| TelemetryError::Model(e.to_string()))?;
        for (k, p) in &m.profiles {
            if !(p.mean_mbps > 0.0) || p.std_mbps.is_some_and(|s| s < 0.0) || p.cap_mbps.is_some_and(|c| c <= 0.0) {
                return Err(TelemetryError::Model(format!("profile {k}: mean must be > 0, std >= 0, cap > 0")));
            }
        }
        if !(m.sample_interval_s > 0.0) || !(m.latency.mean_ms > 0.0) {
            return Err(TelemetryError::Model("sample interval and latency mean must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&m.coexistence_penalty) {
            return Err(TelemetryError::Model("coexistence_penalty must be in [0, 1]".into()));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn ue_class_for(&self, ue_model: &str, ru_name: &str) -> String {
        self.emulated_ru_class
            .get(ru_name)
            .or_else(|| self.ue_classes.get(ue_model))
            .cloned()
            .unwrap_or_else(|| self.default_ue_class.clone())
    }

    pub fn profile(&self, key: &ProfileKey) -> Result<Resolved, TelemetryError> {
        let p = key
            .candidates()
            .iter()
            .find_map(|k| self.profiles.get(k))
            .ok_or_else(|| TelemetryError::UnknownProfile(key.to_string()))?;
        let std = p.std_mbps.unwrap_or(self.default_std_fraction * p.mean_mbps);
        Ok(Resolved { mean: p.mean_mbps, std, cap: p.cap_mbps.unwrap_or(p.mean_mbps + 5.0 * std) })
    }

    pub fn latency_for(&self, stack: &str) -> LatencyProfile {
        self.latency_per_stack.get(stack).copied().unwrap_or(self.latency)
    }

    pub fn samples_for(&self, duration_s: f64) -> usize {
        if duration_s <= 0.0 {
            0
        } else {
            (duration_s / self.sample_interval_s).floor() as usize
        }
    }
}

/// One timestamped value; `t` is relative to the start of traffic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: SimTime,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub throughput_mbps: Vec<Sample>,
    pub rtt_ms: Vec<Sample>,
}

impl MetricSeries {
    pub fn mean_throughput(&self) -> f64 {
        mean(self.throughput_mbps.iter().map(|s| s.value))
    }

    pub fn mean_rtt(&self) -> f64 {
        mean(self.rtt_ms.iter().map(|s| s.value))
    }
}

/// Arithmetic mean in iteration order; 0 for an empty series.
pub fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Shaping applied on top of the profile for one UE.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Shaping {
    /// Offered load; throughput never exceeds it.
    pub offered_mbps: Option<f64>,
    /// Share of the cell this UE gets (1 / UEs in the cell).
    pub share: f64,
    /// Fractional loss from coexistence what-if runs.
    pub impairment: f64,
}

impl Shaping {
    pub fn full() -> Self {
        Self { offered_mbps: None, share: 1.0, impairment: 0.0 }
    }
}

/// Synthesizes clamped-normal throughput and RTT series. The same inputs
/// always produce the same series.
pub fn synthesize_performance(model: &PerformanceModel, key: &ProfileKey, duration_s: f64, seed: u64, shaping: Shaping) -> Result<MetricSeries, TelemetryError> {
    let p = model.profile(key)?;
    let n = model.samples_for(duration_s);
    let label = rng::label(&key.to_string());
    let mut thr_rng = rng::stream(seed, &[label, 1]);
    let mut rtt_rng = rng::stream(seed, &[label, 2]);
    let share = if shaping.share > 0.0 { shaping.share.min(1.0) } else { 1.0 };
    let thr = Normal::new(p.mean * share, p.std * share).map_err(|e| TelemetryError::Model(e.to_string()))?;
    let lat = model.latency_for(&key.stack);
    let rtt = Normal::new(lat.mean_ms, lat.std_ms).map_err(|e| TelemetryError::Model(e.to_string()))?;
    let rtt_cap = lat.mean_ms + 5.0 * lat.std_ms;
    let keep = 1.0 - shaping.impairment.clamp(0.0, 1.0);
    let mut series = MetricSeries { throughput_mbps: Vec::with_capacity(n), rtt_ms: Vec::with_capacity(n) };
    for i in 0..n {
        let t = SimTime::from_secs_f64(i as f64 * model.sample_interval_s);
        let mut v = thr.sample(&mut thr_rng).clamp(0.0, p.cap * share) * keep;
        if let Some(offered) = shaping.offered_mbps {
            v = v.min(offered);
        }
        series.throughput_mbps.push(Sample { t, value: v });
        series.rtt_ms.push(Sample { t, value: rtt.sample(&mut rtt_rng).clamp(0.0, rtt_cap) });
    }
    Ok(series)
}
