//! The microbenchmark workloads and the SSB driver. Timing covers the
//! operator call only; input generation and loading happen beforehand.

use std::str::FromStr;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::cost_models::{
    model_join_probe, model_project, model_q21, model_select, model_sort, CostEstimate,
    HardwareProfile, ModelError, Q21Params,
};
use crate::operators::{
    join_probe_prefetch, join_probe_scalar, join_probe_tile, lsb_radix_sort, msb_radix_sort,
    project_linear, project_sigmoid, project_tile, select_branching, select_predicated,
    select_tile, LinearProbeHashTable, ProjectKind, DEFAULT_PREFETCH_DISTANCE,
};
use crate::parallel::{run_workers, split_even};
use crate::params;
use crate::ssb_queries::{plan_for, run_plan, run_reference, validate, Mismatch, QueryId};
use crate::storage::SsbDatabase;
use crate::tile_engine::{Kernel, Predicate};

use super::{time_reps, BenchError, BenchReport};

/// Shared settings of a benchmark run.
#[derive(Clone, Debug)]
pub struct BenchEnv {
    pub kernel: Kernel,
    pub reps: usize,
    pub seed: u64,
    /// When set, each report carries the matching model prediction.
    pub profile: Option<HardwareProfile>,
}

impl BenchEnv {
    fn workers(&self) -> usize {
        self.kernel.worker_count()
    }

    fn finish(
        &self,
        report: BenchReport,
        model: impl FnOnce(&HardwareProfile) -> Result<CostEstimate, ModelError>,
    ) -> Result<BenchReport, BenchError> {
        Ok(match &self.profile {
            Some(p) => report.with_model(&model(p)?),
            None => report,
        })
    }
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// One 32-bit word per element; element `i` always uses word `i` of the
/// `(seed, tag)` stream.
fn fill_words<T: Send>(n: usize, seed: u64, tag: u64, f: impl Fn(u32) -> T + Sync) -> Vec<T> {
    let base = stream(seed, tag);
    let workers = crate::parallel::default_workers().min(n / 65_536 + 1);
    let parts = split_even(n, workers);
    run_workers(workers, |w| {
        let r = parts[w].clone();
        let mut rng = base.clone();
        rng.set_word_pos(r.start as u128);
        r.map(|_| f(rng.next_u32())).collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Uniform in `lo..=hi`.
pub fn uniform_i32(n: usize, lo: i32, hi: i32, seed: u64, tag: u64) -> Vec<i32> {
    assert!(lo <= hi);
    let span = (i64::from(hi) - i64::from(lo) + 1) as u64;
    fill_words(n, seed, tag, move |w| {
        lo + ((u64::from(w) * span) >> 32) as i32
    })
}

pub fn uniform_u32(n: usize, seed: u64, tag: u64) -> Vec<u32> {
    fill_words(n, seed, tag, |w| w)
}

/// Uniform in `[0, 1)` with 24 random bits.
pub fn uniform_f32(n: usize, seed: u64, tag: u64) -> Vec<f32> {
    fill_words(n, seed, tag, |w| (w >> 8) as f32 / (1u32 << 24) as f32)
}

/// Select inputs are uniform in `[0, 2^30)`; `x < select_threshold(s)`
/// then selects a fraction `s` in expectation.
pub const SELECT_DOMAIN: i32 = 1 << 30;

pub fn select_threshold(sigma: f64) -> i32 {
    (sigma.clamp(0.0, 1.0) * f64::from(SELECT_DOMAIN)).round() as i32
}

macro_rules! variant_enum {
    ($name:ident { $($v:ident => $s:literal),* $(,)? }) => {
        #[derive(Clone, Copy, Debug, PartialEq, Eq)]
        pub enum $name { $($v),* }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$v),*];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$v => $s),* }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s { $($s => Ok($name::$v),)* _ => Err(format!(
                    "unknown {} {s:?} (expected one of: {})",
                    stringify!($name),
                    [$($s),*].join(", ")
                )) }
            }
        }
    };
}

variant_enum!(SelectVariant { Branching => "branching", Predicated => "predicated", Tile => "tile" });
variant_enum!(ProjectVariant { Scalar => "scalar", Tile => "tile" });
variant_enum!(JoinVariant { Scalar => "scalar", Prefetch => "prefetch", Tile => "tile" });
variant_enum!(SortAlgo { Lsb => "lsb", Msb => "msb" });

fn common(env: &BenchEnv) -> serde_json::Map<String, serde_json::Value> {
    let mut m = serde_json::Map::new();
    m.insert("config".into(), json!(env.kernel.config().to_string()));
    m.insert("workers".into(), json!(env.workers()));
    m
}

fn report(
    bench: &str,
    env: &BenchEnv,
    mut p: std::collections::BTreeMap<String, serde_json::Value>,
    times: Vec<f64>,
    bytes: u64,
) -> BenchReport {
    p.extend(common(env));
    BenchReport::new(bench, p, times, bytes)
}

pub fn bench_select(
    n: usize,
    sigmas: &[f64],
    variants: &[SelectVariant],
    env: &BenchEnv,
) -> Result<Vec<BenchReport>, BenchError> {
    let column = uniform_i32(n, 0, SELECT_DOMAIN - 1, env.seed, 1);
    let mut out = Vec::new();
    for &sigma in sigmas {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(BenchError::InvalidSweep(format!(
                "selectivity {sigma} outside [0, 1]"
            )));
        }
        let pred = Predicate::Lt(select_threshold(sigma));
        for &v in variants {
            let (times, res) = time_reps(env.reps, || match v {
                SelectVariant::Branching => select_branching(&column, &pred, env.workers()),
                SelectVariant::Predicated => select_predicated(&column, &pred, env.workers()),
                SelectVariant::Tile => select_tile(&column, &pred, &env.kernel),
            });
            let rows = res?;
            let sum: i64 = rows.iter().map(|&x| i64::from(x)).sum();
            let r = report(
                "select",
                env,
                params! {"n" => n, "sigma" => sigma, "variant" => v.as_str()},
                times,
                4 * (n + rows.len()) as u64,
            )
            .with_result(json!({"rows": rows.len(), "sum": sum}));
            out.push(env.finish(r, |p| model_select(n as f64, sigma, p))?);
        }
    }
    Ok(out)
}

pub fn bench_project(
    n: usize,
    kinds: &[ProjectKind],
    variants: &[ProjectVariant],
    env: &BenchEnv,
) -> Result<Vec<BenchReport>, BenchError> {
    let x1 = uniform_f32(n, env.seed, 2);
    let x2 = uniform_f32(n, env.seed, 3);
    let (a, b) = (2.0f32, 3.0f32);
    let mut out = Vec::new();
    for &kind in kinds {
        for &v in variants {
            let (times, res) = time_reps(env.reps, || match (v, kind) {
                (ProjectVariant::Scalar, ProjectKind::Linear) => {
                    project_linear(&x1, &x2, a, b, env.workers())
                }
                (ProjectVariant::Scalar, ProjectKind::Sigmoid) => {
                    project_sigmoid(&x1, &x2, a, b, env.workers())
                }
                (ProjectVariant::Tile, k) => project_tile(&x1, &x2, a, b, k, &env.kernel),
            });
            let values = res?;
            let sum: f64 = values.iter().map(|&x| f64::from(x)).sum();
            let kind_name = match kind {
                ProjectKind::Linear => "linear",
                ProjectKind::Sigmoid => "sigmoid",
            };
            let r = report(
                "project",
                env,
                params! {"n" => n, "kind" => kind_name, "variant" => v.as_str()},
                times,
                12 * n as u64,
            )
            .with_result(json!({"rows": values.len(), "sum": sum}));
            out.push(env.finish(r, |p| model_project(n as f64, p))?);
        }
    }
    Ok(out)
}

/// Inputs of one join point: a build side of `build_rows` distinct keys
/// `1..=build_rows` with random payloads, and `probe_rows` probes drawn
/// uniformly from the build keys with random values.
pub fn join_inputs(
    build_rows: usize,
    probe_rows: usize,
    seed: u64,
) -> (Vec<i32>, Vec<i32>, Vec<i32>, Vec<i32>) {
    let tag = build_rows as u64;
    let keys: Vec<i32> = (1..=build_rows as i32).collect();
    let payloads = uniform_i32(build_rows, 0, 1 << 20, seed, (tag << 8) | 4);
    let probe_keys = uniform_i32(
        probe_rows,
        1,
        build_rows.max(1) as i32,
        seed,
        (tag << 8) | 5,
    );
    let probe_vals = uniform_i32(probe_rows, 0, 1 << 20, seed, (tag << 8) | 6);
    (keys, payloads, probe_keys, probe_vals)
}

/// For each hash table size (bytes, a power of two of at least 16), builds
/// a table of `ht_bytes / 8` slots at fill ratio 1/2 and probes it.
pub fn bench_join(
    probe_rows: usize,
    ht_sizes: &[usize],
    variants: &[JoinVariant],
    env: &BenchEnv,
) -> Result<Vec<BenchReport>, BenchError> {
    let mut out = Vec::new();
    for &ht in ht_sizes {
        if !ht.is_power_of_two() || ht < 16 {
            return Err(BenchError::InvalidSweep(format!(
                "hash table size {ht} must be a power of two >= 16"
            )));
        }
        let capacity = ht / 8;
        let (bk, bp, pk, pv) = join_inputs(capacity / 2, probe_rows, env.seed);
        let table = LinearProbeHashTable::build_parallel(&bk, &bp, capacity, env.workers())?;
        drop((bk, bp));
        for &v in variants {
            let (times, res) = time_reps(env.reps, || match v {
                JoinVariant::Scalar => join_probe_scalar(&pk, &pv, &table, env.workers()),
                JoinVariant::Prefetch => {
                    join_probe_prefetch(&pk, &pv, &table, DEFAULT_PREFETCH_DISTANCE, env.workers())
                }
                JoinVariant::Tile => join_probe_tile(&pk, &pv, &table, &env.kernel),
            });
            let checksum = res?;
            let r = report(
                "join",
                env,
                params! {"probe_rows" => probe_rows, "ht_bytes" => ht, "variant" => v.as_str()},
                times,
                8 * probe_rows as u64,
            )
            .with_result(json!({"checksum": checksum}));
            out.push(env.finish(r, |p| model_join_probe(probe_rows as f64, ht as f64, p))?);
        }
    }
    Ok(out)
}

/// Sorts `n` random keys with payload = original index. Both algorithms run
/// four 8-bit passes over the data.
pub fn bench_sort(
    n: usize,
    algos: &[SortAlgo],
    env: &BenchEnv,
) -> Result<Vec<BenchReport>, BenchError> {
    const PASSES: u32 = 4;
    let keys = uniform_u32(n, env.seed, 7);
    let payloads: Vec<u32> = (0..n as u32).collect();
    let mut out = Vec::new();
    for &algo in algos {
        let (times, res) = time_reps(env.reps, || match algo {
            SortAlgo::Lsb => lsb_radix_sort(&keys, &payloads, env.workers()),
            SortAlgo::Msb => msb_radix_sort(&keys, &payloads, env.workers()),
        });
        let (k, p) = res?;
        let sorted = k.windows(2).all(|w| w[0] <= w[1]);
        let paired = k.iter().zip(&p).all(|(&key, &i)| keys[i as usize] == key);
        let r = report(
            "sort",
            env,
            params! {"n" => n, "algo" => algo.as_str()},
            times,
            u64::from(PASSES) * 20 * n as u64,
        )
        .with_result(json!({"sorted": sorted, "paired": paired}));
        out.push(env.finish(r, |p| model_sort(n as f64, p, PASSES))?);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SsbRun {
    pub query: QueryId,
    pub report: BenchReport,
    /// `Some` when validation ran and failed.
    pub mismatch: Option<Mismatch>,
}

/// Model inputs for q21 taken from the database's actual cardinalities.
pub fn q21_params_for(db: &SsbDatabase) -> Q21Params {
    Q21Params {
        lineorder: db.lineorder.rows() as f64,
        supplier: db.supplier.rows() as f64,
        part: db.part.rows() as f64,
        date: db.date.rows() as f64,
        part_ht_bytes: 8.0 * db.part.rows() as f64,
        ..Q21Params::reference()
    }
}

/// Times each query. With `check`, also runs the reference interpreter and
/// records any difference. The model is attached to q21 only.
pub fn bench_ssb(
    db: &SsbDatabase,
    queries: &[QueryId],
    env: &BenchEnv,
    check: bool,
) -> Result<Vec<SsbRun>, BenchError> {
    let mut out = Vec::new();
    for &id in queries {
        let plan = plan_for(id);
        let (times, res) = time_reps(env.reps, || run_plan(db, &plan, &env.kernel));
        let (result, stats) = res?;
        let mismatch = if check {
            validate(&run_reference(db, id)?, &result).err()
        } else {
            None
        };
        let bytes = 4 * (plan.fact_columns().len() * db.lineorder.rows()) as u64;
        let mut payload = json!({
            "groups": result.len(),
            "checksum": format!("{:016x}", result.checksum()),
            "after_join": stats.after_join,
        });
        if check {
            payload["validated"] = json!(mismatch.is_none());
        }
        let mut r = report(
            "ssb",
            env,
            params! {"query" => id.as_str(), "sf" => db.scale_factor},
            times,
            bytes,
        )
        .with_result(payload);
        if id == QueryId::Q21 {
            r = env.finish(r, |p| model_q21(&q21_params_for(db), p, p.class))?;
        }
        out.push(SsbRun {
            query: id,
            report: r,
            mismatch,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile_engine::TileConfig;

    fn env(profile: Option<HardwareProfile>) -> BenchEnv {
        BenchEnv {
            kernel: Kernel::new(TileConfig::default()).workers(2),
            reps: 2,
            seed: 5,
            profile,
        }
    }

    #[test]
    fn generators_are_deterministic_and_in_range() {
        let a = uniform_i32(100_000, -3, 3, 1, 9);
        assert_eq!(a, uniform_i32(100_000, -3, 3, 1, 9));
        assert!(a.iter().all(|x| (-3..=3).contains(x)));
        assert_ne!(a, uniform_i32(100_000, -3, 3, 1, 10));
        assert!(uniform_f32(1000, 1, 1)
            .iter()
            .all(|x| (0.0..1.0).contains(x)));
    }

    #[test]
    fn select_reports_agree_across_variants() {
        let reps = bench_select(
            50_000,
            &[0.0, 0.5, 1.0],
            SelectVariant::ALL,
            &env(Some(HardwareProfile::table2_cpu())),
        )
        .unwrap();
        assert_eq!(reps.len(), 9);
        for chunk in reps.chunks(3) {
            assert!(chunk.iter().all(|r| r.result == chunk[0].result));
            assert!(chunk[0].model_ms.is_some());
            assert_eq!(chunk[0].profile, "table2-cpu");
        }
        assert_eq!(reps[0].result["rows"], 0);
        assert_eq!(reps[8].result["rows"], 50_000);
    }

    #[test]
    fn join_sort_project_smoke() {
        let e = env(None);
        let j = bench_join(10_000, &[1024, 4096], JoinVariant::ALL, &e).unwrap();
        assert_eq!(j.len(), 6);
        assert!(j[..3].iter().all(|r| r.result == j[0].result));
        assert!(bench_join(10, &[1000], JoinVariant::ALL, &e).is_err());
        for r in bench_sort(20_000, SortAlgo::ALL, &e).unwrap() {
            assert_eq!(r.result, json!({"sorted": true, "paired": true}));
        }
        let p = bench_project(
            10_000,
            &[ProjectKind::Linear, ProjectKind::Sigmoid],
            ProjectVariant::ALL,
            &e,
        )
        .unwrap();
        assert_eq!(p[0].result, p[1].result);
        assert_eq!(p[2].result, p[3].result);
    }

    #[test]
    fn variant_names() {
        assert_eq!(
            "prefetch".parse::<JoinVariant>().unwrap(),
            JoinVariant::Prefetch
        );
        assert!("quick"
            .parse::<SortAlgo>()
            .unwrap_err()
            .contains("lsb, msb"));
    }
}
