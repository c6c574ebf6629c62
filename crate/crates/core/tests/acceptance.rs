//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails. Criterion 11 is informational.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::Value;
use tilescan::bench::{
    probe_hardware, select_threshold, uniform_i32, uniform_u32, ProbeOptions, SELECT_DOMAIN,
};
use tilescan::cost_models::{
    model_coprocessor, model_join_probe, model_project, model_q21, model_select, model_sort,
    HardwareProfile, ProfileClass, Q21Params,
};
use tilescan::operators::{
    join_probe_prefetch, join_probe_scalar, join_probe_tile, lsb_radix_sort, msb_radix_sort,
    radix_histogram, radix_offsets, radix_shuffle, select_branching, select_predicated,
    select_tile, LinearProbeHashTable, Owners, RadixPass, DEFAULT_PREFETCH_DISTANCE,
};
use tilescan::parallel::default_workers;
use tilescan::ssb_queries::{plan_for, run_plan, run_query, run_reference, validate, QueryId};
use tilescan::storage::{generate_ssb, SsbDatabase};
use tilescan::tile_engine::{CursorMode, Kernel, Predicate, TileConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn c1_q21_model() -> Outcome {
    let params = Q21Params {
        l2_hit_ratio: Some(5.7 / 8.0),
        ..Q21Params::reference()
    };
    let gpu = model_q21(
        &params,
        &HardwareProfile::table2_gpu(),
        ProfileClass::GpuLike,
    )
    .unwrap()
    .total_ms();
    let cpu = model_q21(
        &params,
        &HardwareProfile::table2_cpu(),
        ProfileClass::CpuLike,
    )
    .unwrap()
    .total_ms();
    let (eg, ec) = (rel_err(gpu, 3.7), rel_err(cpu, 47.0));
    outcome(
        eg <= 0.05 && ec <= 0.05,
        format!(
            "gpu {gpu:.4} ms vs 3.7 ({:.1}% off), cpu {cpu:.3} ms vs 47 ({:.1}% off), tolerance 5%",
            eg * 100.0,
            ec * 100.0
        ),
    )
}

fn c2_coprocessor() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for rows in [1.0, 1e3, 120e6, 1e12] {
        let b = model_coprocessor(rows * 16.0, 54e9, 12.8e9).unwrap();
        ok &= b.host_seconds < b.coprocessor_seconds;
    }
    let r = model_coprocessor(120e6 * 16.0, 54e9, 12.8e9).unwrap();
    ok &=
        rel_err(r.host_seconds * 1e3, 35.6) < 0.01 && rel_err(r.coprocessor_seconds, 0.15) < 1e-12;
    notes.push(format!(
        "L=120e6: host {:.2} ms, coprocessor {:.1} ms",
        r.host_seconds * 1e3,
        r.coprocessor_seconds * 1e3
    ));
    let mut rng = StdRng::seed_from_u64(2);
    let mut checked = 0;
    for profile in [HardwareProfile::table2_cpu(), HardwareProfile::table2_gpu()] {
        let bp = profile.interconnect_bw_bytes_per_sec.unwrap();
        let bc = profile.read_bw_bytes_per_sec;
        let b = model_coprocessor(1e9, bc, bp).unwrap();
        ok &= (bc > bp) == (b.host_seconds < b.coprocessor_seconds);
        checked += 1;
    }
    for _ in 0..10_000 {
        let bc = 10f64.powf(rng.random_range(6.0..13.0));
        let bp = 10f64.powf(rng.random_range(6.0..13.0));
        let bytes = 10f64.powf(rng.random_range(0.0..15.0));
        let b = model_coprocessor(bytes, bc, bp).unwrap();
        ok &= (bc > bp) == (b.host_seconds < b.coprocessor_seconds);
        checked += 1;
    }
    notes.push(format!(
        "B_c > B_p iff host wins on {checked} bandwidth pairs"
    ));
    outcome(ok, notes.join("; "))
}

fn c3_golden() -> Outcome {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(root.join("tests/data/model_golden.json")).unwrap();
    let golden: Value = serde_json::from_str(&text).unwrap();
    let mut worst = 0f64;
    let mut count = 0;
    for c in golden["cases"].as_array().unwrap() {
        let name = c["profile"].as_str().unwrap();
        let profile =
            HardwareProfile::load(&root.join("../../profiles").join(format!("{name}.json")))
                .unwrap();
        let n = c["n"].as_f64().unwrap();
        let est = match c["model"].as_str().unwrap() {
            "project" => model_project(n, &profile),
            "select" => model_select(n, c["sigma"].as_f64().unwrap(), &profile),
            "sort" => model_sort(n, &profile, c["passes"].as_u64().unwrap() as u32),
            _ => unreachable!(),
        }
        .unwrap();
        let mut pairs: Vec<(f64, f64)> = est
            .terms
            .iter()
            .map(|t| (t.seconds, c["terms"][&t.name].as_f64().unwrap_or(f64::NAN)))
            .collect();
        pairs.push((est.total_seconds, c["total_seconds"].as_f64().unwrap()));
        for (got, want) in pairs {
            let e = if got == want { 0.0 } else { rel_err(got, want) };
            worst = worst.max(if e.is_nan() { f64::INFINITY } else { e });
        }
        count += 1;
    }
    outcome(
        worst <= 1e-9,
        format!("{count} cases, worst relative error {worst:.2e}"),
    )
}

fn c4_join_steps() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for profile in [HardwareProfile::table2_cpu(), HardwareProfile::table2_gpu()] {
        let sizes: Vec<f64> = profile
            .cache_levels
            .iter()
            .filter_map(|l| l.size_bytes)
            .map(|s| s as f64)
            .collect();
        let mut grid: Vec<f64> = (13..=30).map(|e| f64::from(1u32 << e)).collect();
        for &s in &sizes {
            grid.push(s);
            grid.push(s + 1.0);
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let cost = |h: f64| model_join_probe(256e6, h, &profile).unwrap().total_seconds;
        let mut drops = Vec::new();
        for w in grid.windows(2) {
            let (a, b) = (cost(w[0]), cost(w[1]));
            if b < a * (1.0 - 1e-12) {
                drops.push(format!(
                    "{}B {:.3} ms -> {}B {:.3} ms",
                    w[0],
                    a * 1e3,
                    w[1],
                    b * 1e3
                ));
            }
        }
        let mut flat = Vec::new();
        for &s in &sizes {
            let (a, b) = (cost(s), cost(s + 1.0));
            if (b - a).abs() <= 1e-3 * a {
                flat.push(format!("{s}B"));
            }
        }
        ok &= drops.is_empty() && flat.is_empty();
        notes.push(format!(
            "{}: decreasing steps [{}], no discontinuity at [{}]",
            profile.label,
            drops.join(", "),
            flat.join(", ")
        ));
    }
    outcome(ok, notes.join("; "))
}

fn c5_select() -> Outcome {
    let start = Instant::now();
    let n = 1 << 20;
    let column = uniform_i32(n, 0, SELECT_DOMAIN - 1, 5, 1);
    let configs: Vec<TileConfig> = [32, 128, 1024]
        .into_iter()
        .flat_map(|bt| [1, 4].map(|ipt| TileConfig::new(bt, ipt).unwrap()))
        .collect();
    let workers = default_workers().max(2);
    let mut bad = Vec::new();
    for step in 0..=10 {
        let sigma = f64::from(step) / 10.0;
        let pred = Predicate::Lt(select_threshold(sigma));
        let oracle: Vec<i32> = column
            .iter()
            .copied()
            .filter(|&x| x < select_threshold(sigma))
            .collect();
        let mut sorted_oracle = oracle.clone();
        sorted_oracle.sort_unstable();
        if select_branching(&column, &pred, workers).unwrap() != oracle {
            bad.push(format!("branching sigma={sigma}"));
        }
        if select_predicated(&column, &pred, workers).unwrap() != oracle {
            bad.push(format!("predicated sigma={sigma}"));
        }
        for &cfg in &configs {
            for mode in [CursorMode::Deterministic, CursorMode::ArrivalOrder] {
                let kernel = Kernel::new(cfg).workers(workers).mode(mode);
                let first = select_tile(&column, &pred, &kernel).unwrap();
                let mut sorted = first.clone();
                sorted.sort_unstable();
                if sorted != sorted_oracle {
                    bad.push(format!("tile {cfg} {mode:?} sigma={sigma}"));
                }
                if mode == CursorMode::Deterministic
                    && select_tile(&column, &pred, &kernel).unwrap() != first
                {
                    bad.push(format!("tile {cfg} not repeatable at sigma={sigma}"));
                }
            }
        }
    }
    let t = start.elapsed();
    let in_time = t < Duration::from_secs(30);
    outcome(
        bad.is_empty() && in_time,
        format!(
            "11 selectivities x 2 scalar + 6 tile shapes x 2 modes, mismatches {bad:?}, {}",
            secs(t)
        ),
    )
}

fn c6_join() -> Outcome {
    let start = Instant::now();
    let probe_rows = 1 << 16;
    let mut rng = StdRng::seed_from_u64(6);
    let workers = default_workers().max(2);
    let mut bad = Vec::new();
    let mut sums = Vec::new();
    for build_exp in [8, 10, 12, 14, 16] {
        let b = 1usize << build_exp;
        let mut domain: Vec<i32> = (1..=2 * b as i32).collect();
        domain.shuffle(&mut rng);
        let keys = &domain[..b];
        let payloads: Vec<i32> = (0..b).map(|_| rng.random_range(0..1 << 20)).collect();
        let probe_keys: Vec<i32> = (0..probe_rows)
            .map(|_| rng.random_range(1..=2 * b as i32))
            .collect();
        let probe_vals: Vec<i32> = (0..probe_rows)
            .map(|_| rng.random_range(0..1 << 20))
            .collect();

        let mut oracle = 0i64;
        for (&k, &v) in probe_keys.iter().zip(&probe_vals) {
            for (&bk, &bp) in keys.iter().zip(&payloads) {
                if bk == k {
                    oracle += i64::from(v) + i64::from(bp);
                }
            }
        }
        let cap = (2 * b).next_power_of_two();
        let table = LinearProbeHashTable::build(keys, &payloads, cap).unwrap();
        let par = LinearProbeHashTable::build_parallel(keys, &payloads, cap, workers).unwrap();
        let mut got = vec![
            (
                "scalar",
                join_probe_scalar(&probe_keys, &probe_vals, &table, workers).unwrap(),
            ),
            (
                "scalar/parallel-build",
                join_probe_scalar(&probe_keys, &probe_vals, &par, 1).unwrap(),
            ),
            (
                "prefetch",
                join_probe_prefetch(
                    &probe_keys,
                    &probe_vals,
                    &table,
                    DEFAULT_PREFETCH_DISTANCE,
                    workers,
                )
                .unwrap(),
            ),
        ];
        for cfg in [
            TileConfig::default(),
            TileConfig::new(32, 1).unwrap(),
            TileConfig::new(1024, 4).unwrap(),
        ] {
            let kernel = Kernel::new(cfg).workers(workers);
            got.push((
                "tile",
                join_probe_tile(&probe_keys, &probe_vals, &table, &kernel).unwrap(),
            ));
        }
        for (name, s) in got {
            if s != oracle {
                bad.push(format!("{name} build=2^{build_exp}: {s} != {oracle}"));
            }
        }
        sums.push(oracle);
    }
    let t = start.elapsed();
    outcome(
        bad.is_empty() && t < Duration::from_secs(30),
        format!(
            "|P|=2^16, checksums {sums:?}, mismatches {bad:?}, {}",
            secs(t)
        ),
    )
}

fn c7_sort() -> Outcome {
    let start = Instant::now();
    let n = 1 << 20;
    let keys = uniform_u32(n, 7, 1);
    let payloads: Vec<u32> = (0..n as u32).collect();
    let mut reference: Vec<(u32, u32)> =
        keys.iter().copied().zip(payloads.iter().copied()).collect();
    reference.sort_by_key(|&(k, _)| k);
    let mut bad = Vec::new();
    for workers in [1, default_workers().max(4)] {
        let (k, p) = lsb_radix_sort(&keys, &payloads, workers).unwrap();
        let lsb: Vec<(u32, u32)> = k.into_iter().zip(p).collect();
        if lsb != reference {
            bad.push(format!("lsb workers={workers} differs from stable sort"));
        }
        let (k, p) = msb_radix_sort(&keys, &payloads, workers).unwrap();
        let ascending = k.windows(2).all(|w| w[0] <= w[1]);
        let paired = k.iter().zip(&p).all(|(&k, &p)| keys[p as usize] == k);
        let mut seen = p.clone();
        seen.sort_unstable();
        if !ascending || !paired || seen != payloads {
            bad.push(format!(
                "msb workers={workers}: ascending={ascending} paired={paired}"
            ));
        }
    }
    let t = start.elapsed();
    outcome(
        bad.is_empty() && t < Duration::from_secs(10),
        format!("n=2^20, failures {bad:?}, {}", secs(t)),
    )
}

fn c8_radix_pass() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let mut bad = Vec::new();
    for case in 0..1000 {
        let n = rng.random_range(0..=1usize << 12);
        let bits = rng.random_range(1..=8u32);
        let start = rng.random_range(0..=32 - bits);
        let stable = rng.random_bool(0.5);
        let pass = RadixPass::new(start, bits, stable).unwrap();
        let owners = if rng.random_bool(0.5) {
            Owners::PerThread(rng.random_range(1..=16))
        } else {
            let bt = [32, 64, 128, 256][rng.random_range(0..4)];
            Owners::PerBlock(TileConfig::new(bt, [1, 2, 4, 8][rng.random_range(0..4)]).unwrap())
        };
        let workers = rng.random_range(1..=4);
        // Narrow key ranges give many equal digits.
        let span = [1u64 << 32, 1 << 12, 16][rng.random_range(0..3)];
        let keys: Vec<u32> = (0..n).map(|_| rng.random_range(0..span) as u32).collect();
        let payloads: Vec<u32> = (0..n as u32).collect();

        let hist = radix_histogram(&keys, &pass, owners, workers).unwrap();
        let total: usize = hist.digit_totals().iter().sum();
        let rows_ok = (0..hist.owner_count())
            .all(|o| hist.row(o).iter().sum::<usize>() == hist.owner_range(o).len());
        if total != n || !rows_ok {
            bad.push(format!("case {case}: histogram sums {total} != {n}"));
            continue;
        }
        let (k, p) =
            radix_shuffle(&keys, &payloads, &pass, &radix_offsets(&hist), workers).unwrap();
        let digit = |k: u32| ((u64::from(k) >> start) & ((1 << bits) - 1)) as u32;
        if stable {
            let mut order: Vec<u32> = payloads.clone();
            order.sort_by_key(|&i| (digit(keys[i as usize]), i));
            let want: Vec<u32> = order.iter().map(|&i| keys[i as usize]).collect();
            if p != order || k != want {
                bad.push(format!("case {case}: stable shuffle differs from oracle"));
            }
        } else {
            let grouped = k.windows(2).all(|w| digit(w[0]) <= digit(w[1]));
            let paired = k.iter().zip(&p).all(|(&k, &p)| keys[p as usize] == k);
            let mut seen = p.clone();
            seen.sort_unstable();
            if !grouped || !paired || seen != payloads {
                bad.push(format!(
                    "case {case}: unstable shuffle not a digit partition"
                ));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("1000 instances, failures {:?}", &bad[..bad.len().min(5)]),
    )
}

fn c9_ssb(db: &SsbDatabase) -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    let mut runs = 0;
    for id in QueryId::ALL {
        let expected = run_reference(db, id).unwrap();
        for cfg in [TileConfig::default(), TileConfig::new(32, 1).unwrap()] {
            for workers in [1, 8] {
                let got = run_query(db, id, cfg, workers).unwrap();
                if let Err(m) = validate(&expected, &got) {
                    bad.push(format!("{id} {cfg} workers={workers}: {m}"));
                }
                runs += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        bad.is_empty() && t < Duration::from_secs(120),
        format!(
            "SF=1, {runs} runs of 13 queries, mismatches {bad:?}, {}",
            secs(t)
        ),
    )
}

fn within_3sd(hits: u64, trials: u64, p: f64) -> (bool, String) {
    let n = trials as f64;
    let sd = (n * p * (1.0 - p)).sqrt();
    let dev = hits as f64 - n * p;
    (
        dev.abs() <= 3.0 * sd,
        format!("{hits}/{trials} ({:+.2} sd from p={p:.4})", dev / sd),
    )
}

fn c10_selectivity(db: &SsbDatabase) -> Outcome {
    let america = db.dictionary("s_region").unwrap().code("AMERICA").unwrap();
    let mfgr12 = db
        .dictionary("p_category")
        .unwrap()
        .code("MFGR#12")
        .unwrap();
    let s_region = db.supplier.i32s("s_region").unwrap();
    let p_category = db.part.i32s("p_category").unwrap();
    let s_hits = s_region.iter().filter(|&&r| r == america).count() as u64;
    let p_hits = p_category.iter().filter(|&&c| c == mfgr12).count() as u64;
    let (s_rows, p_rows) = (s_region.len() as u64, p_category.len() as u64);

    let (_, stats) = run_plan(
        db,
        &plan_for(QueryId::Q21),
        &Kernel::new(TileConfig::default()),
    )
    .unwrap();
    let checks = [
        ("supplier region", within_3sd(s_hits, s_rows, 0.2)),
        ("part category", within_3sd(p_hits, p_rows, 1.0 / 25.0)),
        (
            "fact rows through supplier",
            within_3sd(
                stats.after_join[0],
                stats.fact_rows,
                s_hits as f64 / s_rows as f64,
            ),
        ),
        (
            "of those through part",
            within_3sd(
                stats.after_join[1],
                stats.after_join[0],
                p_hits as f64 / p_rows as f64,
            ),
        ),
    ];
    let ok = checks.iter().all(|(_, (ok, _))| *ok);
    let detail: Vec<String> = checks
        .iter()
        .map(|(n, (_, d))| format!("{n} {d}"))
        .collect();
    outcome(ok, detail.join("; "))
}

fn mem_available_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn c11_bandwidth() -> Outcome {
    let profile = match probe_hardware(&ProbeOptions::default()) {
        Ok(p) => p,
        Err(e) => return outcome(false, format!("probe failed: {e}")),
    };
    let mut n = 1usize << 29;
    // Input column plus slack for the untouched output reservation.
    while n > 1 << 24 && mem_available_bytes().is_some_and(|m| (n as u64) * 4 * 3 / 2 > m) {
        n /= 2;
    }
    let column = uniform_i32(n, 0, SELECT_DOMAIN - 1, 11, 1);
    let kernel = Kernel::new(TileConfig::default()).workers(default_workers());
    let pred = Predicate::Lt(0);
    let mut best = f64::INFINITY;
    for _ in 0..3 {
        let t = Instant::now();
        let out = select_tile(&column, &pred, &kernel).unwrap();
        best = best.min(t.elapsed().as_secs_f64());
        assert!(out.is_empty());
    }
    let achieved = 4.0 * n as f64 / best;
    let ratio = achieved / profile.read_bw_bytes_per_sec;
    outcome(
        ratio >= 0.5,
        format!(
            "N=2^{}, select {:.2} GB/s vs probed read {:.2} GB/s ({:.0}%)",
            n.trailing_zeros(),
            achieved / 1e9,
            profile.read_bw_bytes_per_sec / 1e9,
            ratio * 100.0
        ),
    )
}

fn main() -> ExitCode {
    let mut results: BTreeMap<u32, (&str, bool, Outcome)> = BTreeMap::new();
    let mut record = |id: u32, name: &'static str, gating: bool, f: &mut dyn FnMut() -> Outcome| {
        let o = f();
        println!(
            "{} {id:>2} {name}{}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            if gating { "" } else { " (informational)" },
            o.detail
        );
        results.insert(id, (name, gating, o));
    };
    record(1, "q21 model reproduction", true, &mut c1_q21_model);
    record(2, "coprocessor model", true, &mut c2_coprocessor);
    record(3, "model golden values", true, &mut c3_golden);
    record(4, "join model step curve", true, &mut c4_join_steps);
    record(5, "select oracle", true, &mut c5_select);
    record(6, "join oracle", true, &mut c6_join);
    record(7, "sort oracle", true, &mut c7_sort);
    record(8, "radix pass properties", true, &mut c8_radix_pass);
    let t = Instant::now();
    let db = generate_ssb(1, 42).unwrap();
    println!("     generated SF=1 in {}", secs(t.elapsed()));
    record(9, "ssb end to end", true, &mut || c9_ssb(&db));
    record(10, "selectivity calibration", true, &mut || {
        c10_selectivity(&db)
    });
    drop(db);
    record(11, "bandwidth saturation", false, &mut c11_bandwidth);

    let failed: Vec<u32> = results
        .iter()
        .filter(|(_, (_, gating, o))| *gating && !o.pass)
        .map(|(id, _)| *id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: gating criteria failed: {failed:?}");
        ExitCode::FAILURE
    }
}
