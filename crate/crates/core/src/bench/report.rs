use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cost_models::CostEstimate;

/// One measured point of a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub bench: String,
    pub params: BTreeMap<String, Value>,
    pub reps: usize,
    pub rep_times_ms: Vec<f64>,
    pub mean_ms: f64,
    pub min_ms: f64,
    pub bytes_moved: u64,
    /// `bytes_moved` over the mean time, in 10^9 bytes per second.
    pub achieved_gbps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub model_terms_ms: BTreeMap<String, f64>,
    pub profile: String,
    /// Output digest (row counts, checksums, validation). Independent of
    /// timing, so identical across runs with the same inputs.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
}

impl BenchReport {
    pub fn new(
        bench: impl Into<String>,
        params: BTreeMap<String, Value>,
        rep_times_ms: Vec<f64>,
        bytes_moved: u64,
    ) -> Self {
        assert!(
            !rep_times_ms.is_empty(),
            "a report needs at least one repetition"
        );
        let mean_ms = rep_times_ms.iter().sum::<f64>() / rep_times_ms.len() as f64;
        let min_ms = rep_times_ms.iter().copied().fold(f64::INFINITY, f64::min);
        let achieved_gbps = if mean_ms > 0.0 {
            bytes_moved as f64 / (mean_ms * 1e-3) / 1e9
        } else {
            0.0
        };
        Self {
            bench: bench.into(),
            params,
            reps: rep_times_ms.len(),
            rep_times_ms,
            mean_ms,
            min_ms,
            bytes_moved,
            achieved_gbps,
            model_ms: None,
            model_terms_ms: BTreeMap::new(),
            profile: String::new(),
            result: Value::Null,
        }
    }

    pub fn with_model(mut self, est: &CostEstimate) -> Self {
        self.model_ms = Some(est.total_ms());
        self.model_terms_ms = est
            .terms
            .iter()
            .map(|t| (t.name.clone(), t.seconds * 1e3))
            .collect();
        self.profile = est.profile.clone();
        self
    }

    pub fn with_result(mut self, result: Value) -> Self {
        self.result = result;
        self
    }

    pub fn with_profile(mut self, label: impl Into<String>) -> Self {
        self.profile = label.into();
        self
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub const CSV_HEADER: &'static str =
        "bench,params,reps,rep_times_ms,mean_ms,min_ms,bytes_moved,achieved_gbps,model_ms,profile,result";

    pub fn to_csv_row(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={}", plain(v)))
            .collect();
        let reps: Vec<String> = self
            .rep_times_ms
            .iter()
            .map(|t| format!("{t:.6}"))
            .collect();
        let fields = [
            self.bench.clone(),
            params.join(";"),
            self.reps.to_string(),
            reps.join(";"),
            format!("{:.6}", self.mean_ms),
            format!("{:.6}", self.min_ms),
            self.bytes_moved.to_string(),
            format!("{:.6}", self.achieved_gbps),
            self.model_ms.map(|m| format!("{m:.6}")).unwrap_or_default(),
            self.profile.clone(),
            if self.result.is_null() {
                String::new()
            } else {
                self.result.to_string()
            },
        ];
        fields
            .iter()
            .map(|f| csv_field(f))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Runs `f` `reps` times and returns the wall time of each run in
/// milliseconds and the last result.
pub fn time_reps<T>(reps: usize, mut f: impl FnMut() -> T) -> (Vec<f64>, T) {
    assert!(reps >= 1, "reps must be at least 1");
    let mut times = Vec::with_capacity(reps);
    let mut last = None;
    for _ in 0..reps {
        let t0 = Instant::now();
        let out = f();
        times.push(t0.elapsed().as_secs_f64() * 1e3);
        last = Some(std::hint::black_box(out));
    }
    (times, last.expect("at least one rep"))
}

/// Builds a params map from `key => value` pairs.
#[macro_export]
macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = ::std::collections::BTreeMap::new();
        $( m.insert(::std::string::String::from($k), ::serde_json::json!($v)); )*
        m
    }};
}
