//! `SELECT y FROM R WHERE pred(y)` in several formulations.
//!
//! Every variant returns the matches of each input partition in input order.
//! The per-worker variants concatenate partitions in worker order; the tile
//! variant in deterministic cursor mode concatenates block outputs in block
//! order, where each block's output is thread-major.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::parallel::{run_workers, split_even, SharedSink};
use crate::tile_engine::block::block_store_slice_shared;
use crate::tile_engine::{
    block_load, block_pred, block_scan_into, block_shuffle, block_thread_counts, BlockBitmap,
    BlockScan, Element, Kernel, PredKernel, Predicate, PredicateSpec, Tile,
};

use super::OpError;

/// Elements per vector in the per-worker loops; the staging buffer of one
/// vector stays cache resident.
const VECTOR: usize = 1024;

/// Per-worker loop with a data-dependent branch per element.
pub fn select_branching<T: Element>(
    column: &[T],
    pred: &Predicate<T>,
    workers: usize,
) -> Result<Vec<T>, OpError> {
    pred.validate()?;
    Ok(per_worker(column, workers, |part| {
        pred.with_kernel(Branching { part })
    }))
}

/// Per-worker loop that always writes and advances the output index by the
/// predicate result, avoiding the branch.
pub fn select_predicated<T: Element>(
    column: &[T],
    pred: &Predicate<T>,
    workers: usize,
) -> Result<Vec<T>, OpError> {
    pred.validate()?;
    Ok(per_worker(column, workers, |part| {
        pred.with_kernel(Predicated { part })
    }))
}

struct Branching<'a, T> {
    part: &'a [T],
}

impl<T: Element> PredKernel<T> for Branching<'_, T> {
    type Output = Vec<T>;
    fn run<P: Fn(T) -> bool + Copy>(self, pred: P) -> Vec<T> {
        let mut out = Vec::new();
        let mut buf = [T::default(); VECTOR];
        for chunk in self.part.chunks(VECTOR) {
            let mut j = 0;
            for &x in chunk {
                if pred(x) {
                    buf[j] = x;
                    j += 1;
                }
            }
            out.extend_from_slice(&buf[..j]);
        }
        out
    }
}

struct Predicated<'a, T> {
    part: &'a [T],
}

impl<T: Element> PredKernel<T> for Predicated<'_, T> {
    type Output = Vec<T>;
    fn run<P: Fn(T) -> bool + Copy>(self, pred: P) -> Vec<T> {
        let mut out = Vec::new();
        let mut buf = [T::default(); VECTOR];
        for chunk in self.part.chunks(VECTOR) {
            let mut j = 0;
            for &x in chunk {
                buf[j] = x;
                j += usize::from(pred(x));
            }
            out.extend_from_slice(&buf[..j]);
        }
        out
    }
}

fn per_worker<T: Element>(
    column: &[T],
    workers: usize,
    f: impl Fn(&[T]) -> Vec<T> + Sync,
) -> Vec<T> {
    let workers = workers.max(1).min(column.len().max(1));
    let parts = split_even(column.len(), workers);
    let mut pieces = run_workers(workers, |w| f(&column[parts[w].clone()]));
    if pieces.len() == 1 {
        return pieces.pop().unwrap_or_default();
    }
    let total = pieces.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    for p in pieces {
        out.extend_from_slice(&p);
    }
    out
}

/// Naive parallel select: every match claims its output slot with an atomic
/// increment of one shared counter. Output order is unspecified.
pub fn select_atomic_cursor<T: Element>(
    column: &[T],
    pred: &Predicate<T>,
    workers: usize,
) -> Result<Vec<T>, OpError> {
    pred.validate()?;
    let mut out: Vec<T> = Vec::with_capacity(column.len());
    let cursor = AtomicUsize::new(0);
    {
        let sink = SharedSink::from_uninit(&mut out.spare_capacity_mut()[..column.len()]);
        let workers = workers.max(1).min(column.len().max(1));
        let parts = split_even(column.len(), workers);
        run_workers(workers, |w| {
            for &x in &column[parts[w].clone()] {
                if pred.eval(x) {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    // SAFETY: every index is handed out exactly once and is
                    // below column.len().
                    unsafe { sink.write(i, x) };
                }
            }
        });
    }
    // SAFETY: the first `cursor` slots were written above.
    unsafe { out.set_len(cursor.load(Ordering::Acquire)) };
    Ok(out)
}

struct SelectScratch<T> {
    tile: Tile<T>,
    bitmap: BlockBitmap,
    counts: Vec<u64>,
    scan: BlockScan,
    shuffled: Tile<T>,
}

/// Tile kernel: load, predicate, per-thread counts, block scan, shuffle into
/// a contiguous staging tile, claim a range from the global cursor, store.
pub fn select_tile<T: Element>(
    column: &[T],
    pred: &Predicate<T>,
    kernel: &Kernel,
) -> Result<Vec<T>, OpError> {
    pred.validate()?;
    let config = kernel.config();
    let spec = PredicateSpec::init(*pred);
    let mut out: Vec<T> = Vec::with_capacity(column.len());
    let total = {
        let sink = SharedSink::from_uninit(&mut out.spare_capacity_mut()[..column.len()]);
        kernel.launch_cursor(
            column.len(),
            || SelectScratch {
                tile: Tile::for_config(&config),
                bitmap: BlockBitmap::new(config.tile_size()),
                counts: Vec::with_capacity(config.block_threads()),
                scan: BlockScan::default(),
                shuffled: Tile::for_config(&config),
            },
            |ctx, s| {
                block_load(column, ctx, &mut s.tile);
                block_pred(&s.tile, &spec, &mut s.bitmap).expect("predicate validated above");
                block_thread_counts(&s.bitmap, &config, &mut s.counts);
                block_scan_into(&s.counts, &mut s.scan);
                block_shuffle(&s.tile, &s.bitmap, &s.scan, &config, &mut s.shuffled)
                    .expect("scan computed from the same bitmap");
                s.shuffled.to_vec()
            },
            |_, _, staged: Vec<T>, grant| {
                block_store_slice_shared(&staged, &sink, grant)
                    .expect("grant lies inside the output buffer");
            },
        )
    };
    // SAFETY: the cursor granted `total` slots as disjoint ranges covering
    // `0..total`, and every grant was filled by its commit.
    unsafe { out.set_len(total) };
    Ok(out)
}
