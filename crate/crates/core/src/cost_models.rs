//! Bandwidth-bound runtime models.
//!
//! Every model assumes the operator saturates the relevant memory or cache
//! bandwidth and predicts runtime as bytes moved divided by bandwidth. All
//! quantities are plain bytes, bytes per second and seconds.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const KIB: f64 = 1024.0;
const MIB: f64 = 1024.0 * 1024.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("profile {profile:?} lacks {field}, which this model requires")]
    MissingProfileField { profile: String, field: String },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("cannot read profile {path}: {message}")]
    ProfileIo { path: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileClass {
    CpuLike,
    GpuLike,
}

impl ProfileClass {
    pub fn default_cache_line(self) -> u32 {
        match self {
            ProfileClass::CpuLike => 64,
            ProfileClass::GpuLike => 128,
        }
    }
}

impl std::str::FromStr for ProfileClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpu" | "cpu_like" | "cpu-like" => Ok(ProfileClass::CpuLike),
            "gpu" | "gpu_like" | "gpu-like" => Ok(ProfileClass::GpuLike),
            other => Err(format!(
                "unknown target {other:?} (expected cpu_like or gpu_like)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheLevel {
    pub name: String,
    /// `None` when the size could not be determined.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_bytes: Option<u64>,
    /// `None` when the level's bandwidth is not known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bytes_per_sec: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HardwareProfile {
    pub label: String,
    pub class: ProfileClass,
    pub read_bw_bytes_per_sec: f64,
    pub write_bw_bytes_per_sec: f64,
    /// Ordered from the smallest (L1) to the last-level cache.
    #[serde(default)]
    pub cache_levels: Vec<CacheLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_line_bytes: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interconnect_bw_bytes_per_sec: Option<f64>,
}

impl HardwareProfile {
    /// The 8-core desktop CPU column of the reference hardware table.
    /// L1/L2 are per-core sizes; only L3 has a published bandwidth.
    pub fn table2_cpu() -> Self {
        Self {
            label: "table2-cpu".into(),
            class: ProfileClass::CpuLike,
            read_bw_bytes_per_sec: 53e9,
            write_bw_bytes_per_sec: 55e9,
            cache_levels: vec![
                level("L1", 32.0 * KIB, None),
                level("L2", 256.0 * KIB, None),
                level("L3", 20.0 * MIB, Some(157e9)),
            ],
            cache_line_bytes: Some(64),
            interconnect_bw_bytes_per_sec: Some(12.8e9),
        }
    }

    /// The data-center GPU column of the reference hardware table.
    pub fn table2_gpu() -> Self {
        Self {
            label: "table2-gpu".into(),
            class: ProfileClass::GpuLike,
            read_bw_bytes_per_sec: 880e9,
            write_bw_bytes_per_sec: 880e9,
            cache_levels: vec![
                level("L1", 16.0 * KIB, Some(10.7e12)),
                level("L2", 6.0 * MIB, Some(2.2e12)),
            ],
            cache_line_bytes: Some(128),
            interconnect_bw_bytes_per_sec: Some(12.8e9),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| ModelError::InvalidProfile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|e| ModelError::ProfileIo {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidProfile(m));
        if !positive(self.read_bw_bytes_per_sec) || !positive(self.write_bw_bytes_per_sec) {
            return bad("read and write bandwidth must be positive".into());
        }
        if let Some(bp) = self.interconnect_bw_bytes_per_sec {
            if !positive(bp) {
                return bad("interconnect bandwidth must be positive".into());
            }
        }
        if self.cache_line_bytes == Some(0) {
            return bad("cache line size must be positive".into());
        }
        let mut prev = 0u64;
        for c in &self.cache_levels {
            if let Some(bw) = c.bandwidth_bytes_per_sec {
                if !positive(bw) {
                    return bad(format!("{} bandwidth must be positive", c.name));
                }
            }
            if let Some(s) = c.size_bytes {
                if s <= prev {
                    return bad(format!(
                        "cache sizes must be positive and strictly increasing (at {})",
                        c.name
                    ));
                }
                prev = s;
            }
        }
        Ok(())
    }

    /// Cache line size, falling back to the class default.
    pub fn line_bytes(&self) -> f64 {
        f64::from(
            self.cache_line_bytes
                .unwrap_or_else(|| self.class.default_cache_line()),
        )
    }

    fn missing(&self, field: impl Into<String>) -> ModelError {
        ModelError::MissingProfileField {
            profile: self.label.clone(),
            field: field.into(),
        }
    }

    fn cache_size(&self, k: usize) -> Result<f64, ModelError> {
        let c = &self.cache_levels[k];
        c.size_bytes
            .map(|s| s as f64)
            .ok_or_else(|| self.missing(format!("cache_levels[{}].size_bytes", c.name)))
    }

    /// Size of the last-level cache.
    pub fn llc_bytes(&self) -> Result<f64, ModelError> {
        if self.cache_levels.is_empty() {
            return Err(self.missing("cache_levels"));
        }
        self.cache_size(self.cache_levels.len() - 1)
    }
}

fn level(name: &str, size: f64, bw: Option<f64>) -> CacheLevel {
    CacheLevel {
        name: name.into(),
        size_bytes: Some(size as u64),
        bandwidth_bytes_per_sec: bw,
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostTerm {
    pub name: String,
    pub seconds: f64,
}

/// A predicted runtime and the terms it is the sum of. When a model takes
/// the maximum of alternatives, the losing ones are listed in `shadowed` and
/// do not count toward the total.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub model: String,
    pub profile: String,
    pub total_seconds: f64,
    pub terms: Vec<CostTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub shadowed: Vec<CostTerm>,
}

impl CostEstimate {
    fn new(model: &str, profile: &HardwareProfile, terms: Vec<(&str, f64)>) -> Self {
        let terms: Vec<CostTerm> = terms
            .into_iter()
            .map(|(n, s)| CostTerm {
                name: n.into(),
                seconds: s,
            })
            .collect();
        Self {
            model: model.into(),
            profile: profile.label.clone(),
            total_seconds: terms.iter().map(|t| t.seconds).sum(),
            terms,
            shadowed: Vec::new(),
        }
    }

    pub fn total_ms(&self) -> f64 {
        self.total_seconds * 1e3
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.name == name)
            .map(|t| t.seconds)
    }
}

fn check_count(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be a finite non-negative number, got {v}"
        )))
    }
}

fn check_fraction(name: &str, v: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

/// Two 4-byte input columns read, one 4-byte column written.
pub fn model_project(n: f64, profile: &HardwareProfile) -> Result<CostEstimate, ModelError> {
    check_count("N", n)?;
    profile.validate()?;
    Ok(CostEstimate::new(
        "project",
        profile,
        vec![
            ("read", 2.0 * 4.0 * n / profile.read_bw_bytes_per_sec),
            ("write", 4.0 * n / profile.write_bw_bytes_per_sec),
        ],
    ))
}

/// One 4-byte column read, a fraction `sigma` of it written back.
pub fn model_select(
    n: f64,
    sigma: f64,
    profile: &HardwareProfile,
) -> Result<CostEstimate, ModelError> {
    check_count("N", n)?;
    check_fraction("sigma", sigma)?;
    profile.validate()?;
    Ok(CostEstimate::new(
        "select",
        profile,
        vec![
            ("read", 4.0 * n / profile.read_bw_bytes_per_sec),
            ("write", 4.0 * sigma * n / profile.write_bw_bytes_per_sec),
        ],
    ))
}

/// Probe phase of a no-partitioning hash join with `probe_rows` probes into
/// a table of `ht_bytes`.
///
/// If the table fits in cache level K (the smallest level at least `ht_bytes`
/// large), runtime is the larger of the probe-side scan `8P/B_r` and the
/// cache traffic `(1 - pi_{K-1}) * P * C / B_K`, with
/// `pi_K = min(S_K / H, 1)`. A level without a known bandwidth contributes no
/// cache term, so the scan bounds it. Past the last-level cache, runtime is
/// `8P/B_r + (1 - pi) * P * C / B_r` with `pi = S_LLC / H`.
pub fn model_join_probe(
    probe_rows: f64,
    ht_bytes: f64,
    profile: &HardwareProfile,
) -> Result<CostEstimate, ModelError> {
    check_count("P", probe_rows)?;
    if !positive(ht_bytes) {
        return Err(ModelError::InvalidParameter(format!(
            "hash table size must be positive, got {ht_bytes}"
        )));
    }
    profile.validate()?;
    let c = profile.line_bytes();
    let scan = 8.0 * probe_rows / profile.read_bw_bytes_per_sec;
    let hit = |s: f64| (s / ht_bytes).min(1.0);

    let mut fitting = None;
    for k in 0..profile.cache_levels.len() {
        if profile.cache_size(k)? >= ht_bytes {
            fitting = Some(k);
            break;
        }
    }
    match fitting {
        Some(k) => {
            let pi_below = if k == 0 {
                0.0
            } else {
                hit(profile.cache_size(k - 1)?)
            };
            let level = &profile.cache_levels[k];
            let mut est = CostEstimate::new("join_probe", profile, vec![]);
            let cache = level
                .bandwidth_bytes_per_sec
                .map(|bk| (1.0 - pi_below) * probe_rows * c / bk);
            let scan_term = CostTerm {
                name: "scan".into(),
                seconds: scan,
            };
            match cache {
                Some(t) if t > scan => {
                    est.terms.push(CostTerm {
                        name: format!("probe_{}", level.name),
                        seconds: t,
                    });
                    est.shadowed.push(scan_term);
                }
                Some(t) => {
                    est.terms.push(scan_term);
                    est.shadowed.push(CostTerm {
                        name: format!("probe_{}", level.name),
                        seconds: t,
                    });
                }
                None => est.terms.push(scan_term),
            }
            est.total_seconds = est.terms.iter().map(|t| t.seconds).sum();
            Ok(est)
        }
        None => {
            let pi = hit(profile.llc_bytes()?);
            Ok(CostEstimate::new(
                "join_probe",
                profile,
                vec![
                    ("scan", scan),
                    (
                        "probe_memory",
                        (1.0 - pi) * probe_rows * c / profile.read_bw_bytes_per_sec,
                    ),
                ],
            ))
        }
    }
}

/// Radix sort of `r` 4-byte keys with 4-byte payloads in `passes` partition
/// passes. Each pass reads the keys once for the histogram, then reads and
/// writes keys and payloads in the shuffle.
pub fn model_sort(
    r: f64,
    profile: &HardwareProfile,
    passes: u32,
) -> Result<CostEstimate, ModelError> {
    check_count("R", r)?;
    if passes < 1 {
        return Err(ModelError::InvalidParameter(
            "at least one pass is required".into(),
        ));
    }
    profile.validate()?;
    let p = f64::from(passes);
    Ok(CostEstimate::new(
        "sort",
        profile,
        vec![
            ("histogram", p * 4.0 * r / profile.read_bw_bytes_per_sec),
            (
                "shuffle_read",
                p * 2.0 * 4.0 * r / profile.read_bw_bytes_per_sec,
            ),
            (
                "shuffle_write",
                p * 2.0 * 4.0 * r / profile.write_bw_bytes_per_sec,
            ),
        ],
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoprocessorBounds {
    /// Upper bound for running on the host: one pass over the bytes at host
    /// memory bandwidth.
    pub host_seconds: f64,
    /// Lower bound for shipping the bytes over the interconnect.
    pub coprocessor_seconds: f64,
}

impl CoprocessorBounds {
    pub fn host_wins(&self) -> bool {
        self.host_seconds < self.coprocessor_seconds
    }
}

pub fn model_coprocessor(
    bytes_scanned: f64,
    host_bw: f64,
    interconnect_bw: f64,
) -> Result<CoprocessorBounds, ModelError> {
    check_count("bytes scanned", bytes_scanned)?;
    if !positive(host_bw) || !positive(interconnect_bw) {
        return Err(ModelError::InvalidParameter(
            "bandwidths must be positive".into(),
        ));
    }
    Ok(CoprocessorBounds {
        host_seconds: bytes_scanned / host_bw,
        coprocessor_seconds: bytes_scanned / interconnect_bw,
    })
}

/// Inputs of the three-join star query model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Q21Params {
    pub lineorder: f64,
    pub supplier: f64,
    pub part: f64,
    pub date: f64,
    /// Fraction of fact rows surviving the supplier join.
    pub sigma1: f64,
    /// Fraction of those surviving the part join.
    pub sigma2: f64,
    /// Bytes of the part hash table.
    pub part_ht_bytes: f64,
    /// Overrides the computed last-level-cache hit ratio of part lookups.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_hit_ratio: Option<f64>,
}

impl Q21Params {
    /// Scale-factor-20 cardinalities with the published selectivities.
    pub fn reference() -> Self {
        Self {
            lineorder: 120e6,
            supplier: 40e3,
            part: 1e6,
            date: 2.5e3,
            sigma1: 1.0 / 5.0,
            sigma2: 1.0 / 25.0,
            part_ht_bytes: 2.0 * 4.0 * 1e6,
            l2_hit_ratio: None,
        }
    }

    /// Bytes of the supplier and date hash tables (two 4-byte slots per row).
    pub fn resident_small_tables_bytes(&self) -> f64 {
        2.0 * 4.0 * (self.supplier + self.date)
    }

    fn validate(&self) -> Result<(), ModelError> {
        for (n, v) in [
            ("|L|", self.lineorder),
            ("|S|", self.supplier),
            ("|P|", self.part),
            ("|D|", self.date),
        ] {
            if !positive(v) {
                return Err(ModelError::InvalidParameter(format!(
                    "{n} must be positive, got {v}"
                )));
            }
        }
        check_fraction("sigma1", self.sigma1)?;
        check_fraction("sigma2", self.sigma2)?;
        if !positive(self.part_ht_bytes) {
            return Err(ModelError::InvalidParameter(
                "part hash table size must be positive".into(),
            ));
        }
        if let Some(pi) = self.l2_hit_ratio {
            check_fraction("pi", pi)?;
        }
        Ok(())
    }
}

/// Hit ratio of part-table lookups in the last-level cache: the cache space
/// left after the small tables, over the part table size, clamped to [0, 1].
pub fn q21_hit_ratio(params: &Q21Params, profile: &HardwareProfile) -> Result<f64, ModelError> {
    if let Some(pi) = params.l2_hit_ratio {
        return Ok(pi);
    }
    let avail = profile.llc_bytes()? - params.resident_small_tables_bytes();
    Ok((avail / params.part_ht_bytes).clamp(0.0, 1.0))
}

/// Probe-phase model of the supplier → part → date star join.
///
/// `r1` reads the fact columns (the first fully, later ones one line per
/// surviving row at most), `r2` covers the hash-table traffic and `r3` the
/// result table. On a cpu-like target all three tables are cache resident,
/// so `r2` charges two lines per dimension row instead of part-table misses.
pub fn model_q21(
    params: &Q21Params,
    profile: &HardwareProfile,
    target: ProfileClass,
) -> Result<CostEstimate, ModelError> {
    params.validate()?;
    profile.validate()?;
    let c = profile.line_bytes();
    let br = profile.read_bw_bytes_per_sec;
    let bw = profile.write_bw_bytes_per_sec;
    let l = params.lineorder;
    let lines = 4.0 * l / c;
    let s1 = l * params.sigma1;
    let s12 = s1 * params.sigma2;

    let r1 = (lines + lines.min(s1) + 2.0 * lines.min(s12)) * c / br;
    let r2 = match target {
        ProfileClass::GpuLike => {
            let pi = q21_hit_ratio(params, profile)?;
            (2.0 * params.supplier + 2.0 * params.date + (1.0 - pi) * s1) * c / br
        }
        ProfileClass::CpuLike => {
            (2.0 * params.supplier + 2.0 * params.date + 2.0 * params.part) * c / br
        }
    };
    let r3 = s12 * c / br + s12 * c / bw;
    Ok(CostEstimate::new(
        "q21",
        profile,
        vec![("r1", r1), ("r2", r2), ("r3", r3)],
    ))
}
