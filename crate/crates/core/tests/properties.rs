use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use tilescan::cost_models::{model_select, HardwareProfile};
use tilescan::operators::{
    join_probe_scalar, join_probe_tile, lsb_radix_sort_with_schedule, msb_radix_sort,
    select_branching, select_tile, LinearProbeHashTable, EMPTY_KEY,
};
use tilescan::storage::{dict_decode, dict_encode, load_column, save_column, Column, ColumnData};
use tilescan::tile_engine::{
    block_scan, CursorMode, Kernel, Predicate, TileConfig, BLOCK_THREADS, ITEMS_PER_THREAD,
};

fn standard_config() -> impl Strategy<Value = TileConfig> {
    (0..BLOCK_THREADS.len(), 0..ITEMS_PER_THREAD.len())
        .prop_map(|(b, i)| TileConfig::new(BLOCK_THREADS[b], ITEMS_PER_THREAD[i]).unwrap())
}

fn config() -> impl Strategy<Value = TileConfig> {
    prop_oneof![
        standard_config(),
        (1usize..300, 1usize..9).prop_map(|(b, i)| TileConfig::custom(b, i).unwrap()),
    ]
}

fn predicate() -> impl Strategy<Value = Predicate<i32>> {
    prop_oneof![
        any::<i32>().prop_map(Predicate::Lt),
        any::<i32>().prop_map(Predicate::Ge),
        (-50i32..50).prop_map(Predicate::Eq),
        (-100i32..100, 0i32..100).prop_map(|(lo, w)| Predicate::Between(lo, lo + w)),
    ]
}

fn eval(p: &Predicate<i32>, x: i32) -> bool {
    match *p {
        Predicate::Lt(v) => x < v,
        Predicate::Le(v) => x <= v,
        Predicate::Gt(v) => x > v,
        Predicate::Ge(v) => x >= v,
        Predicate::Eq(v) => x == v,
        Predicate::Between(lo, hi) => lo <= x && x <= hi,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tile_select_is_a_filter(
        column in prop::collection::vec(-100i32..100, 0..3000),
        pred in predicate(),
        cfg in config(),
        workers in 1usize..5,
        arrival in any::<bool>(),
    ) {
        let mode = if arrival { CursorMode::ArrivalOrder } else { CursorMode::Deterministic };
        let kernel = Kernel::new(cfg).workers(workers).mode(mode);
        let mut got = select_tile(&column, &pred, &kernel).unwrap();
        let mut want: Vec<i32> = column.iter().copied().filter(|&x| eval(&pred, x)).collect();
        prop_assert_eq!(&select_branching(&column, &pred, workers).unwrap(), &want);
        got.sort_unstable();
        want.sort_unstable();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn block_scan_is_exclusive_prefix_sum(counts in prop::collection::vec(0u64..1000, 0..2100)) {
        let s = block_scan(&counts);
        let mut acc = 0;
        for (i, &c) in counts.iter().enumerate() {
            prop_assert_eq!(s.prefix[i], acc);
            acc += c;
        }
        prop_assert_eq!(s.total, acc);
    }

    #[test]
    fn hash_table_matches_map(
        entries in prop::collection::hash_map(any::<i32>().prop_filter("reserved", |&k| k != EMPTY_KEY), any::<i32>(), 0..500),
        absent in prop::collection::vec(any::<i32>(), 0..100),
        extra_bits in 0u32..3,
        workers in 1usize..5,
    ) {
        let (keys, payloads): (Vec<i32>, Vec<i32>) = entries.iter().map(|(&k, &v)| (k, v)).unzip();
        let cap = ((2 * keys.len()).max(1).next_power_of_two()) << extra_bits;
        let serial = LinearProbeHashTable::build(&keys, &payloads, cap).unwrap();
        let parallel = LinearProbeHashTable::build_parallel(&keys, &payloads, cap, workers).unwrap();
        prop_assert_eq!(serial.len(), keys.len());
        for (k, v) in &entries {
            prop_assert_eq!(serial.probe(*k), Some(*v));
            prop_assert_eq!(parallel.probe(*k), Some(*v));
        }
        for k in absent.iter().filter(|k| !entries.contains_key(k)) {
            prop_assert_eq!(serial.probe(*k), None);
            prop_assert_eq!(parallel.probe(*k), None);
        }
    }

    #[test]
    fn duplicate_build_keys_are_rejected(keys in prop::collection::vec(0i32..20, 2..40)) {
        let distinct: BTreeSet<i32> = keys.iter().copied().collect();
        let cap = (2 * keys.len()).next_power_of_two();
        let r = LinearProbeHashTable::build(&keys, &keys, cap);
        prop_assert_eq!(r.is_ok(), distinct.len() == keys.len());
    }

    #[test]
    fn tile_join_matches_scalar(
        build in prop::collection::hash_set(1i32..5000, 0..400),
        probes in prop::collection::vec((1i32..5000, -1000i32..1000), 0..3000),
        cfg in config(),
        workers in 1usize..5,
    ) {
        let keys: Vec<i32> = build.into_iter().collect();
        let payloads: Vec<i32> = keys.iter().map(|k| k * 3 - 7).collect();
        let (pk, pv): (Vec<i32>, Vec<i32>) = probes.into_iter().unzip();
        let table = LinearProbeHashTable::build(&keys, &payloads, (2 * keys.len()).max(16).next_power_of_two()).unwrap();
        let lookup: HashMap<i32, i32> = keys.iter().copied().zip(payloads.iter().copied()).collect();
        let want: i64 = pk.iter().zip(&pv)
            .filter_map(|(k, &v)| lookup.get(k).map(|&p| i64::from(v) + i64::from(p)))
            .sum();
        prop_assert_eq!(join_probe_scalar(&pk, &pv, &table, workers).unwrap(), want);
        let kernel = Kernel::new(cfg).workers(workers);
        prop_assert_eq!(join_probe_tile(&pk, &pv, &table, &kernel).unwrap(), want);
    }

    #[test]
    fn radix_sorts_agree_with_std(
        keys in prop::collection::vec(any::<u32>(), 0..3000),
        schedule in prop::sample::select(vec![vec![8u32, 8, 8, 8], vec![4; 8], vec![1, 7, 8, 8, 8], vec![6, 6, 6, 6, 8]]),
        workers in 1usize..5,
    ) {
        let payloads: Vec<u32> = (0..keys.len() as u32).collect();
        let mut pairs: Vec<(u32, u32)> = keys.iter().copied().zip(payloads.iter().copied()).collect();
        pairs.sort_by_key(|&(k, _)| k);
        let (k, p) = lsb_radix_sort_with_schedule(&keys, &payloads, &schedule, workers).unwrap();
        prop_assert_eq!(k.iter().copied().zip(p).collect::<Vec<_>>(), pairs.clone());
        let (k, p) = msb_radix_sort(&keys, &payloads, workers).unwrap();
        let want_keys: Vec<u32> = pairs.iter().map(|&(k, _)| k).collect();
        prop_assert_eq!(&k, &want_keys);
        prop_assert!(k.iter().zip(&p).all(|(&k, &p)| keys[p as usize] == k));
    }

    #[test]
    fn tile_config_text_round_trips(cfg in standard_config()) {
        prop_assert_eq!(cfg.to_string().parse::<TileConfig>().unwrap(), cfg);
    }

    #[test]
    fn dictionary_round_trips(words in prop::collection::vec("[A-Z#0-9 ]{0,6}", 0..200)) {
        let (column, dict) = dict_encode("c", &words);
        let ColumnData::Int32(codes) = &column.data else { panic!("codes are int32") };
        prop_assert_eq!(dict_decode(codes, &dict).unwrap(), words.clone());
        // Codes follow first appearance.
        let mut seen = Vec::new();
        for w in &words {
            if !seen.contains(w) {
                seen.push(w.clone());
            }
        }
        prop_assert_eq!(codes.iter().copied().max().map_or(0, |m| m + 1) as usize, seen.len());
    }

    #[test]
    fn column_files_round_trip(values in prop::collection::vec(any::<i32>(), 0..2000)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.col");
        let col = Column::int32("x", values);
        save_column(&path, &col).unwrap();
        prop_assert_eq!(load_column(&path).unwrap().data, col.data);
    }

    #[test]
    fn select_model_is_linear_in_sigma(n in 0f64..1e10, a in 0f64..=1.0, b in 0f64..=1.0) {
        for p in [HardwareProfile::table2_cpu(), HardwareProfile::table2_gpu()] {
            let m = |s: f64| model_select(n, s, &p).unwrap();
            let mid = m((a + b) / 2.0).total_seconds;
            let avg = (m(a).total_seconds + m(b).total_seconds) / 2.0;
            prop_assert!((mid - avg).abs() <= 1e-12 * avg.max(1e-300));
            let e = m(a);
            let sum: f64 = e.terms.iter().map(|t| t.seconds).sum();
            prop_assert!((sum - e.total_seconds).abs() <= 1e-12 * sum.max(1e-300));
        }
    }
}
