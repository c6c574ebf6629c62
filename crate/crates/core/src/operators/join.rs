//! `SELECT SUM(A.v + B.v) FROM A, B WHERE A.k = B.k` with `B` pre-built into a
//! [`LinearProbeHashTable`] mapping `B.k` to `B.v`. Sums are 8-byte.

use std::sync::atomic::{AtomicI64, Ordering};

use crate::parallel::{run_workers, split_even};
use crate::tile_engine::{
    block_aggregate, block_load, block_lookup, AggKind, BlockBitmap, Kernel, Tile, TileConfig,
};

use super::{check_same_len, LinearProbeHashTable, OpError};

/// Probes issued ahead of the current one by [`join_probe_prefetch`].
pub const DEFAULT_PREFETCH_DISTANCE: usize = 16;

/// One probe per input row; each worker keeps a local sum and adds it to the
/// global total once.
pub fn join_probe_scalar(
    keys: &[i32],
    vals: &[i32],
    table: &LinearProbeHashTable,
    workers: usize,
) -> Result<i64, OpError> {
    check_same_len(keys.len(), vals.len())?;
    let total = AtomicI64::new(0);
    let workers = workers.max(1).min(keys.len().max(1));
    let parts = split_even(keys.len(), workers);
    run_workers(workers, |w| {
        let r = parts[w].clone();
        let mut sum = 0i64;
        for (&k, &v) in keys[r.clone()].iter().zip(&vals[r]) {
            if let Some(p) = table.probe(k) {
                sum += i64::from(v) + i64::from(p);
            }
        }
        total.fetch_add(sum, Ordering::Relaxed);
    });
    Ok(total.into_inner())
}

/// Like [`join_probe_scalar`] but issues a software prefetch for the home
/// slot of the key `distance` rows ahead.
pub fn join_probe_prefetch(
    keys: &[i32],
    vals: &[i32],
    table: &LinearProbeHashTable,
    distance: usize,
    workers: usize,
) -> Result<i64, OpError> {
    check_same_len(keys.len(), vals.len())?;
    let total = AtomicI64::new(0);
    let workers = workers.max(1).min(keys.len().max(1));
    let parts = split_even(keys.len(), workers);
    run_workers(workers, |w| {
        let r = parts[w].clone();
        let ks = &keys[r.clone()];
        let vs = &vals[r];
        let mut sum = 0i64;
        for i in 0..ks.len() {
            if let Some(&ahead) = ks.get(i + distance) {
                prefetch(table.slot_ptr(table.home(ahead)));
            }
            if let Some(p) = table.probe(ks[i]) {
                sum += i64::from(vs[i]) + i64::from(p);
            }
        }
        total.fetch_add(sum, Ordering::Relaxed);
    });
    Ok(total.into_inner())
}

#[inline(always)]
fn prefetch(ptr: *const u64) {
    #[cfg(target_arch = "x86_64")]
    // SAFETY: prefetch is a hint and never faults.
    unsafe {
        std::arch::x86_64::_mm_prefetch::<{ std::arch::x86_64::_MM_HINT_T0 }>(ptr.cast());
    }
    #[cfg(not(target_arch = "x86_64"))]
    let _ = ptr;
}

struct JoinScratch {
    keys: Tile<i32>,
    vals: Tile<i32>,
    payloads: Tile<i32>,
    found: BlockBitmap,
    sums: Tile<i64>,
}

/// Tile kernel: load keys and values, block lookup, per-thread partial sums,
/// block reduction, one atomic add per block.
pub fn join_probe_tile(
    keys: &[i32],
    vals: &[i32],
    table: &LinearProbeHashTable,
    kernel: &Kernel,
) -> Result<i64, OpError> {
    check_same_len(keys.len(), vals.len())?;
    let config = kernel.config();
    let bt = config.block_threads();
    let reduce_cfg = TileConfig::custom(bt, 1)?;
    let total = AtomicI64::new(0);
    kernel.launch_with_state(
        keys.len(),
        || JoinScratch {
            keys: Tile::for_config(&config),
            vals: Tile::for_config(&config),
            payloads: Tile::for_config(&config),
            found: BlockBitmap::new(config.tile_size()),
            sums: Tile::new(bt),
        },
        |ctx, s| {
            block_load(keys, ctx, &mut s.keys);
            block_load(vals, ctx, &mut s.vals);
            block_lookup(&s.keys, None, table, &mut s.payloads, &mut s.found).expect("no mask");
            let len = s.keys.valid_count();
            s.sums.begin(bt);
            for t in 0..bt {
                let mut acc = 0i64;
                let mut i = t;
                while i < len {
                    if s.found.get(i) {
                        acc += i64::from(s.vals.get(i)) + i64::from(s.payloads.get(i));
                    }
                    i += bt;
                }
                s.sums.put(t, acc);
            }
            let block_sum = block_aggregate(&s.sums, AggKind::Sum, None, &reduce_cfg);
            total.fetch_add(block_sum, Ordering::Relaxed);
        },
    );
    Ok(total.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nested_loop(keys: &[i32], vals: &[i32], bk: &[i32], bv: &[i32]) -> i64 {
        let mut s = 0i64;
        for (&k, &v) in keys.iter().zip(vals) {
            for (&k2, &v2) in bk.iter().zip(bv) {
                if k == k2 {
                    s += i64::from(v) + i64::from(v2);
                }
            }
        }
        s
    }

    #[test]
    fn variants_match_nested_loop() {
        let bk: Vec<i32> = (0..300).map(|i| i * 3).collect();
        let bv: Vec<i32> = (0..300).map(|i| 1000 - i).collect();
        let keys: Vec<i32> = (0..5000).map(|i| (i * 7) % 1000).collect();
        let vals: Vec<i32> = (0..5000).map(|i| i % 13 - 6).collect();
        let t = LinearProbeHashTable::build(&bk, &bv, 1024).unwrap();
        let expect = nested_loop(&keys, &vals, &bk, &bv);
        assert_eq!(join_probe_scalar(&keys, &vals, &t, 3).unwrap(), expect);
        assert_eq!(
            join_probe_prefetch(&keys, &vals, &t, 16, 2).unwrap(),
            expect
        );
        let k = Kernel::new(TileConfig::new(64, 2).unwrap()).workers(4);
        assert_eq!(join_probe_tile(&keys, &vals, &t, &k).unwrap(), expect);
    }

    #[test]
    fn empty_table_sums_to_zero() {
        let t = LinearProbeHashTable::empty(8).unwrap();
        let k = Kernel::new(TileConfig::default()).workers(2);
        assert_eq!(join_probe_tile(&[1, 2, 3], &[4, 5, 6], &t, &k).unwrap(), 0);
        assert_eq!(join_probe_scalar(&[], &[], &t, 2).unwrap(), 0);
    }
}
