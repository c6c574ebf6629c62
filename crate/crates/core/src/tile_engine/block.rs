//! Block-wide functions: load, predicate, scan, shuffle, store, lookup and
//! aggregate over one tile.

use crate::operators::hash_table::LinearProbeHashTable;
use crate::parallel::SharedSink;

use super::{
    BlockBitmap, BlockContext, Combine, Element, Grant, PredKernel, PredicateSpec, Tile,
    TileConfig, TileError,
};

/// Logical threads per raking segment in [`block_scan`].
const SCAN_SEGMENT: usize = 32;

/// Copies `min(capacity, src.len() - offset)` elements starting at `offset`
/// into the tile. An offset at or past the end yields an empty tile.
pub fn block_load_at<T: Element>(src: &[T], offset: usize, tile: &mut Tile<T>) {
    let end = offset.saturating_add(tile.capacity()).min(src.len());
    if offset >= end {
        tile.fill_from(&[]);
    } else {
        tile.fill_from(&src[offset..end]);
    }
}

/// Loads this block's tile of `src`.
pub fn block_load<T: Element>(src: &[T], ctx: &BlockContext<'_>, tile: &mut Tile<T>) {
    debug_assert!(tile.capacity() >= ctx.config.tile_size());
    let offset = ctx.tile_offset();
    let end = offset.saturating_add(ctx.config.tile_size()).min(src.len());
    tile.fill_from(if offset >= end {
        &[]
    } else {
        &src[offset..end]
    });
}

/// Loads only the slots whose flag is set. Other slots stay undefined.
pub fn block_load_sel<T: Element>(
    src: &[T],
    bitmap: &BlockBitmap,
    ctx: &BlockContext<'_>,
    tile: &mut Tile<T>,
) -> Result<(), TileError> {
    let offset = ctx.tile_offset();
    let len = ctx.tile_len(src.len());
    if bitmap.len() != len {
        return Err(TileError::ContractViolation(format!(
            "selective load: bitmap covers {} slots but tile has {len}",
            bitmap.len()
        )));
    }
    tile.begin(len);
    let src = &src[offset..offset + len];
    for (i, (&f, &v)) in bitmap.flags().iter().zip(src).enumerate() {
        if f {
            tile.put(i, v);
        }
    }
    Ok(())
}

/// Evaluates a predicate over the tile's valid slots.
///
/// `Combine::Init` overwrites `bitmap`; `Combine::And` folds into it and
/// requires it to describe the same tile. Under AND, slots whose previous
/// flag is false are not read, so this composes with [`block_load_sel`].
pub fn block_pred<T: Element>(
    tile: &Tile<T>,
    spec: &PredicateSpec<T>,
    bitmap: &mut BlockBitmap,
) -> Result<(), TileError> {
    spec.predicate.validate()?;
    match spec.combine {
        Combine::Init => {
            bitmap.reset(tile.valid_count(), false);
            spec.predicate.with_kernel(InitKernel {
                items: tile.as_slice(),
                flags: bitmap.flags_mut(),
            });
        }
        Combine::And => {
            if bitmap.len() != tile.valid_count() {
                return Err(TileError::ContractViolation(format!(
                    "AND predicate: bitmap covers {} slots but tile has {}",
                    bitmap.len(),
                    tile.valid_count()
                )));
            }
            spec.predicate.with_kernel(AndKernel {
                tile,
                flags: bitmap.flags_mut(),
            });
        }
    }
    Ok(())
}

struct InitKernel<'a, T> {
    items: &'a [T],
    flags: &'a mut [bool],
}

impl<T: Element> PredKernel<T> for InitKernel<'_, T> {
    type Output = ();
    fn run<P: Fn(T) -> bool + Copy>(self, pred: P) {
        for (f, &x) in self.flags.iter_mut().zip(self.items) {
            *f = pred(x);
        }
    }
}

struct AndKernel<'a, T> {
    tile: &'a Tile<T>,
    flags: &'a mut [bool],
}

impl<T: Element> PredKernel<T> for AndKernel<'_, T> {
    type Output = ();
    fn run<P: Fn(T) -> bool + Copy>(self, pred: P) {
        for (i, f) in self.flags.iter_mut().enumerate() {
            if *f {
                *f = pred(self.tile.get(i));
            }
        }
    }
}

/// Per-logical-thread match counts under the strided slot ownership.
pub fn block_thread_counts(bitmap: &BlockBitmap, config: &TileConfig, counts: &mut Vec<u64>) {
    let bt = config.block_threads();
    counts.clear();
    counts.resize(bt, 0);
    // Slot i belongs to thread i % bt, so each chunk of bt slots is one
    // item per thread.
    for chunk in bitmap.flags().chunks(bt) {
        for (c, &f) in counts.iter_mut().zip(chunk) {
            *c += u64::from(f);
        }
    }
}

/// Exclusive prefix sum over per-thread counts plus the block total.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockScan {
    pub prefix: Vec<u64>,
    pub total: u64,
}

pub fn block_scan(counts: &[u64]) -> BlockScan {
    let mut out = BlockScan::default();
    block_scan_into(counts, &mut out);
    out
}

/// Raking scan: each segment of [`SCAN_SEGMENT`] threads is scanned
/// serially, the segment totals are scanned, then added back.
pub fn block_scan_into(counts: &[u64], out: &mut BlockScan) {
    out.prefix.clear();
    out.prefix.resize(counts.len(), 0);
    let mut segment_totals = [0u64; 64];
    let mut heap_totals = Vec::new();
    let num_segments = counts.len().div_ceil(SCAN_SEGMENT);
    let totals: &mut [u64] = if num_segments <= segment_totals.len() {
        &mut segment_totals[..num_segments]
    } else {
        heap_totals.resize(num_segments, 0);
        &mut heap_totals
    };

    for (seg, (chunk, dst)) in counts
        .chunks(SCAN_SEGMENT)
        .zip(out.prefix.chunks_mut(SCAN_SEGMENT))
        .enumerate()
    {
        let mut acc = 0u64;
        for (c, d) in chunk.iter().zip(dst.iter_mut()) {
            *d = acc;
            acc += c;
        }
        totals[seg] = acc;
    }

    let mut running = 0u64;
    for t in totals.iter_mut() {
        let seg_total = *t;
        *t = running;
        running += seg_total;
    }

    for (dst, &base) in out.prefix.chunks_mut(SCAN_SEGMENT).zip(totals.iter()) {
        for d in dst {
            *d += base;
        }
    }
    out.total = running;
}

/// Compacts the flagged slots of `tile` into the front of `out`.
///
/// Thread `t` writes its matches, in its own slot order, starting at
/// `scan.prefix[t]`, so the output is thread-major. `scan` must be the scan
/// of [`block_thread_counts`] over the same bitmap.
pub fn block_shuffle<T: Element>(
    tile: &Tile<T>,
    bitmap: &BlockBitmap,
    scan: &BlockScan,
    config: &TileConfig,
    out: &mut Tile<T>,
) -> Result<(), TileError> {
    let bt = config.block_threads();
    if scan.prefix.len() != bt {
        return Err(TileError::ContractViolation(format!(
            "shuffle: {} thread offsets for {bt} threads",
            scan.prefix.len()
        )));
    }
    if bitmap.len() != tile.valid_count() {
        return Err(TileError::ContractViolation(
            "shuffle: bitmap does not describe tile".into(),
        ));
    }
    let total = usize::try_from(scan.total).unwrap_or(usize::MAX);
    if total > out.capacity() {
        return Err(TileError::ContractViolation(format!(
            "shuffle: total {total} exceeds output tile capacity {}",
            out.capacity()
        )));
    }
    out.begin(total);
    let dst = out.raw_mut();
    if total > 0 {
        let mut cursors: Vec<usize> = scan.prefix.iter().map(|&p| p as usize).collect();
        for (k, flags) in bitmap.flags().chunks(bt).enumerate() {
            for (j, (c, &f)) in cursors.iter_mut().zip(flags).enumerate() {
                if f {
                    let slot = dst.get_mut(*c).ok_or_else(|| {
                        TileError::ContractViolation(format!(
                            "shuffle: thread {j} writes past output capacity at {c}"
                        ))
                    })?;
                    *slot = tile.get(k * bt + j);
                    *c += 1;
                }
            }
        }
        for (t, &c) in cursors.iter().enumerate() {
            let start = scan.prefix[t] as usize;
            let end = scan.prefix.get(t + 1).map_or(total, |&e| e as usize);
            if c != end {
                return Err(TileError::ContractViolation(format!(
                    "shuffle: thread {t} wrote {} matches into range {start}..{end}",
                    c.wrapping_sub(start)
                )));
            }
        }
    }
    out.mark_defined(total);
    Ok(())
}

/// Copies the tile's valid prefix to `dest[offset..]`.
pub fn block_store<T: Element>(
    tile: &Tile<T>,
    dest: &mut [T],
    offset: usize,
) -> Result<(), TileError> {
    let src = tile.as_slice();
    match offset.checked_add(src.len()) {
        Some(end) if end <= dest.len() => {
            dest[offset..end].copy_from_slice(src);
            Ok(())
        }
        _ => Err(TileError::OutOfBounds {
            offset,
            len: src.len(),
            capacity: dest.len(),
        }),
    }
}

/// Stores into a shared output at a cursor-granted range.
pub fn block_store_shared<T: Element>(
    tile: &Tile<T>,
    sink: &SharedSink<'_, T>,
    grant: Grant,
) -> Result<(), TileError> {
    block_store_slice_shared(tile.as_slice(), sink, grant)
}

pub(crate) fn block_store_slice_shared<T: Element>(
    src: &[T],
    sink: &SharedSink<'_, T>,
    grant: Grant,
) -> Result<(), TileError> {
    let oob = || TileError::OutOfBounds {
        offset: grant.offset(),
        len: src.len(),
        capacity: sink.len(),
    };
    if src.len() > grant.len() {
        return Err(oob());
    }
    // SAFETY: grants from one launch are pairwise disjoint and we write
    // within ours only.
    if unsafe { sink.write_slice(grant.offset(), src) } {
        Ok(())
    } else {
        Err(oob())
    }
}

/// Probes `table` for every valid key (and, if `mask` is given, only where
/// the mask is set). Sets `found[i]` on a hit and puts the payload at slot
/// `i` of `payloads`.
pub fn block_lookup(
    keys: &Tile<i32>,
    mask: Option<&BlockBitmap>,
    table: &LinearProbeHashTable,
    payloads: &mut Tile<i32>,
    found: &mut BlockBitmap,
) -> Result<(), TileError> {
    let len = keys.valid_count();
    if let Some(m) = mask {
        if m.len() != len {
            return Err(TileError::ContractViolation(format!(
                "lookup: mask covers {} slots but tile has {len}",
                m.len()
            )));
        }
    }
    payloads.begin(len);
    found.reset(len, false);
    let flags = found.flags_mut();
    for (i, f) in flags.iter_mut().enumerate() {
        if mask.is_none_or(|m| m.get(i)) {
            if let Some(p) = table.probe(keys.get(i)) {
                payloads.put(i, p);
                *f = true;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggKind {
    Sum,
    Count,
    Min,
    Max,
}

impl AggKind {
    /// Value returned for an empty selection.
    pub fn identity(self) -> i64 {
        match self {
            AggKind::Sum | AggKind::Count => 0,
            AggKind::Min => i64::MAX,
            AggKind::Max => i64::MIN,
        }
    }

    #[inline(always)]
    fn combine(self, a: i64, b: i64) -> i64 {
        match self {
            AggKind::Sum | AggKind::Count => a + b,
            AggKind::Min => a.min(b),
            AggKind::Max => a.max(b),
        }
    }
}

/// Hierarchical reduction: each logical thread folds its strided slots, then
/// the per-thread partials are combined by a pairwise tree. Sums accumulate
/// in 8 bytes.
pub fn block_aggregate<T>(
    values: &Tile<T>,
    kind: AggKind,
    mask: Option<&BlockBitmap>,
    config: &TileConfig,
) -> i64
where
    T: Element + Into<i64>,
{
    let len = values.valid_count();
    if let Some(m) = mask {
        debug_assert_eq!(m.len(), len, "aggregate mask does not describe tile");
    }
    let bt = config.block_threads();
    let mut stack = [0i64; 1024];
    let mut heap = Vec::new();
    let partials: &mut [i64] = if bt <= stack.len() {
        &mut stack[..bt]
    } else {
        heap.resize(bt, 0);
        &mut heap
    };

    for (t, p) in partials.iter_mut().enumerate() {
        let mut acc = kind.identity();
        let mut i = t;
        while i < len {
            if mask.is_none_or(|m| m.get(i)) {
                let v = match kind {
                    AggKind::Count => 1,
                    _ => values.get(i).into(),
                };
                acc = kind.combine(acc, v);
            }
            i += bt;
        }
        *p = acc;
    }

    let mut width = partials.len();
    while width > 1 {
        let half = width.div_ceil(2);
        for t in 0..width / 2 {
            partials[t] = kind.combine(partials[t], partials[t + half]);
        }
        width = half;
    }
    partials[0]
}
