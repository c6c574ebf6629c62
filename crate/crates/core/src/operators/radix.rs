//! Radix partitioning passes and the LSB / MSB sorts built from them.
//!
//! A pass looks at `num_bits` bits starting at `start_bit`. It runs in three
//! steps: per-owner histograms, a 2D exclusive prefix sum that turns them into
//! per-(owner, digit) output offsets, and a shuffle that scatters every
//! (key, payload) pair to its partition.

use std::ops::Range;
use std::sync::Mutex;

use crate::parallel::{run_workers, split_even, SharedSink};
use crate::tile_engine::TileConfig;

use super::{check_same_len, OpError};

/// Bit schedule of the least-significant-digit sort.
pub const DEFAULT_LSB_SCHEDULE: [u32; 4] = [8, 8, 8, 8];

/// Entries per partition in the stable shuffle's staging buffer: one 64-byte
/// line of 4-byte keys.
const STAGE: usize = 16;

/// Partitions at or below this size are finished with a comparison sort.
const COMPARISON_SORT_MAX: usize = 256;

/// Owner blocks of the first MSB pass.
const MSB_TOP_BLOCK: (usize, usize) = (256, 256);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RadixPass {
    start_bit: u32,
    num_bits: u32,
    stable: bool,
}

impl RadixPass {
    pub fn new(start_bit: u32, num_bits: u32, stable: bool) -> Result<Self, OpError> {
        if !(1..=8).contains(&num_bits) {
            return Err(OpError::InvalidRadixPass(format!(
                "num_bits {num_bits} outside 1..=8"
            )));
        }
        if start_bit + num_bits > 32 {
            return Err(OpError::InvalidRadixPass(format!(
                "bits {start_bit}..{} exceed a 32-bit key",
                start_bit + num_bits
            )));
        }
        Ok(Self {
            start_bit,
            num_bits,
            stable,
        })
    }

    pub fn start_bit(&self) -> u32 {
        self.start_bit
    }

    pub fn num_bits(&self) -> u32 {
        self.num_bits
    }

    pub fn is_stable(&self) -> bool {
        self.stable
    }

    pub fn buckets(&self) -> usize {
        1 << self.num_bits
    }

    #[inline(always)]
    pub fn digit(&self, key: u32) -> usize {
        ((key >> self.start_bit) & ((1 << self.num_bits) - 1)) as usize
    }
}

/// Who owns a histogram row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Owners {
    /// `n` contiguous segments of near-equal length, one per thread.
    PerThread(usize),
    /// One segment per tile. The unstable shuffle walks each tile with the
    /// configured number of logical threads in strided order.
    PerBlock(TileConfig),
}

impl Owners {
    fn ranges(&self, len: usize) -> Result<Vec<Range<usize>>, OpError> {
        match *self {
            Owners::PerThread(0) => Err(OpError::InvalidRadixPass("zero histogram owners".into())),
            Owners::PerThread(n) => Ok(split_even(len, n)),
            Owners::PerBlock(cfg) => {
                let ts = cfg.tile_size();
                Ok((0..cfg.num_tiles(len))
                    .map(|b| b * ts..((b + 1) * ts).min(len))
                    .collect())
            }
        }
    }

    fn stride(&self) -> usize {
        match *self {
            Owners::PerThread(_) => 1,
            Owners::PerBlock(cfg) => cfg.block_threads(),
        }
    }
}

/// Digit counts per owner, stored owner-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RadixHistogram {
    pass: RadixPass,
    owner_ranges: Vec<Range<usize>>,
    counts: Vec<usize>,
    stride: usize,
    input_len: usize,
}

impl RadixHistogram {
    pub fn pass(&self) -> RadixPass {
        self.pass
    }

    pub fn owner_count(&self) -> usize {
        self.owner_ranges.len()
    }

    pub fn owner_range(&self, owner: usize) -> Range<usize> {
        self.owner_ranges[owner].clone()
    }

    pub fn row(&self, owner: usize) -> &[usize] {
        let b = self.pass.buckets();
        &self.counts[owner * b..(owner + 1) * b]
    }

    /// Counts per digit summed over all owners.
    pub fn digit_totals(&self) -> Vec<usize> {
        let b = self.pass.buckets();
        let mut totals = vec![0; b];
        for row in self.counts.chunks(b) {
            for (t, c) in totals.iter_mut().zip(row) {
                *t += c;
            }
        }
        totals
    }
}

pub fn radix_histogram(
    keys: &[u32],
    pass: &RadixPass,
    owners: Owners,
    workers: usize,
) -> Result<RadixHistogram, OpError> {
    let owner_ranges = owners.ranges(keys.len())?;
    let b = pass.buckets();
    let workers = workers.max(1).min(owner_ranges.len().max(1));
    let groups = split_even(owner_ranges.len(), workers);
    let rows = run_workers(workers, |w| {
        let mut counts = vec![0usize; groups[w].len() * b];
        for (row, o) in counts.chunks_mut(b).zip(groups[w].clone()) {
            for &k in &keys[owner_ranges[o].clone()] {
                row[pass.digit(k)] += 1;
            }
        }
        counts
    });
    Ok(RadixHistogram {
        pass: *pass,
        owner_ranges,
        counts: rows.concat(),
        stride: owners.stride(),
        input_len: keys.len(),
    })
}

/// Output start of every (owner, digit) partition: digit-major, owners in
/// order within a digit. This ordering is what makes stable passes stable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionOffsets {
    hist: RadixHistogram,
    starts: Vec<usize>,
}

impl PartitionOffsets {
    pub fn pass(&self) -> RadixPass {
        self.hist.pass
    }

    pub fn start(&self, owner: usize, digit: usize) -> usize {
        self.starts[owner * self.hist.pass.buckets() + digit]
    }

    pub fn histogram(&self) -> &RadixHistogram {
        &self.hist
    }

    /// `buckets + 1` boundaries of the digit partitions in the output.
    pub fn digit_bounds(&self) -> Vec<usize> {
        let mut bounds = Vec::with_capacity(self.hist.pass.buckets() + 1);
        let mut acc = 0;
        bounds.push(0);
        for t in self.hist.digit_totals() {
            acc += t;
            bounds.push(acc);
        }
        bounds
    }
}

pub fn radix_offsets(hist: &RadixHistogram) -> PartitionOffsets {
    let b = hist.pass.buckets();
    let owners = hist.owner_count();
    let mut starts = vec![0; hist.counts.len()];
    let mut running = 0;
    for d in 0..b {
        for o in 0..owners {
            starts[o * b + d] = running;
            running += hist.counts[o * b + d];
        }
    }
    PartitionOffsets {
        hist: hist.clone(),
        starts,
    }
}

/// Scatters `(keys, payloads)` according to `offsets`, which must come from
/// a histogram of these keys for this pass.
pub fn radix_shuffle(
    keys: &[u32],
    payloads: &[u32],
    pass: &RadixPass,
    offsets: &PartitionOffsets,
    workers: usize,
) -> Result<(Vec<u32>, Vec<u32>), OpError> {
    let mut out_k = vec![0u32; keys.len()];
    let mut out_p = vec![0u32; keys.len()];
    shuffle_into(
        keys, payloads, pass, offsets, &mut out_k, &mut out_p, workers,
    )?;
    Ok((out_k, out_p))
}

fn shuffle_into(
    keys: &[u32],
    payloads: &[u32],
    pass: &RadixPass,
    offsets: &PartitionOffsets,
    out_k: &mut [u32],
    out_p: &mut [u32],
    workers: usize,
) -> Result<(), OpError> {
    check_same_len(keys.len(), payloads.len())?;
    if *pass != offsets.hist.pass {
        return Err(OpError::OffsetMismatch(format!(
            "offsets were computed for {:?}, shuffle asked for {pass:?}",
            offsets.hist.pass
        )));
    }
    if keys.len() != offsets.hist.input_len {
        return Err(OpError::OffsetMismatch(format!(
            "offsets cover {} elements, input has {}",
            offsets.hist.input_len,
            keys.len()
        )));
    }
    debug_assert_eq!(out_k.len(), keys.len());
    debug_assert_eq!(out_p.len(), keys.len());

    let b = pass.buckets();
    let hist = &offsets.hist;
    let sink_k = SharedSink::new(out_k);
    let sink_p = SharedSink::new(out_p);
    let workers = workers.max(1).min(hist.owner_count().max(1));
    let groups = split_even(hist.owner_count(), workers);
    let results = run_workers(workers, |w| {
        let mut cursor = vec![0usize; b];
        let mut end = vec![0usize; b];
        let mut stage_k = vec![0u32; b * STAGE];
        let mut stage_p = vec![0u32; b * STAGE];
        let mut fill = vec![0usize; b];
        for o in groups[w].clone() {
            for d in 0..b {
                cursor[d] = offsets.starts[o * b + d];
                end[d] = cursor[d] + hist.counts[o * b + d];
            }
            let range = hist.owner_ranges[o].clone();
            let ks = &keys[range.clone()];
            let ps = &payloads[range];
            if pass.stable {
                fill.fill(0);
                for (&k, &p) in ks.iter().zip(ps) {
                    let d = pass.digit(k);
                    let slot = d * STAGE + fill[d];
                    stage_k[slot] = k;
                    stage_p[slot] = p;
                    fill[d] += 1;
                    if fill[d] == STAGE {
                        flush(
                            &sink_k,
                            &sink_p,
                            &stage_k,
                            &stage_p,
                            d,
                            STAGE,
                            &mut cursor[d],
                            end[d],
                        )?;
                        fill[d] = 0;
                    }
                }
                for d in 0..b {
                    if fill[d] > 0 {
                        flush(
                            &sink_k,
                            &sink_p,
                            &stage_k,
                            &stage_p,
                            d,
                            fill[d],
                            &mut cursor[d],
                            end[d],
                        )?;
                    }
                }
            } else {
                let stride = hist.stride;
                for t in 0..stride.min(ks.len().max(1)) {
                    let mut i = t;
                    while i < ks.len() {
                        let d = pass.digit(ks[i]);
                        if cursor[d] >= end[d] {
                            return Err(overflow(o, d));
                        }
                        // SAFETY: cursor[d] lies in this (owner, digit)
                        // partition, which no other owner writes.
                        unsafe {
                            sink_k.write(cursor[d], ks[i]);
                            sink_p.write(cursor[d], ps[i]);
                        }
                        cursor[d] += 1;
                        i += stride;
                    }
                }
            }
            if let Some(d) = (0..b).find(|&d| cursor[d] != end[d]) {
                return Err(OpError::OffsetMismatch(format!(
                    "owner {o} digit {d}: wrote {} of {} entries",
                    cursor[d] + hist.counts[o * b + d] - end[d],
                    hist.counts[o * b + d]
                )));
            }
        }
        Ok(())
    });
    results.into_iter().collect()
}

#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn flush(
    sink_k: &SharedSink<'_, u32>,
    sink_p: &SharedSink<'_, u32>,
    stage_k: &[u32],
    stage_p: &[u32],
    digit: usize,
    n: usize,
    cursor: &mut usize,
    end: usize,
) -> Result<(), OpError> {
    if *cursor + n > end {
        return Err(overflow(usize::MAX, digit));
    }
    let src = digit * STAGE..digit * STAGE + n;
    // SAFETY: [cursor, cursor + n) lies inside this owner's partition for
    // `digit`; partitions are disjoint by construction of the offsets.
    unsafe {
        sink_k.write_slice(*cursor, &stage_k[src.clone()]);
        sink_p.write_slice(*cursor, &stage_p[src]);
    }
    *cursor += n;
    Ok(())
}

fn overflow(owner: usize, digit: usize) -> OpError {
    let who = if owner == usize::MAX {
        String::from("an owner")
    } else {
        format!("owner {owner}")
    };
    OpError::OffsetMismatch(format!(
        "{who} has more digit-{digit} keys than its histogram counted"
    ))
}

/// Stable LSB sort with the default 4 x 8-bit schedule.
pub fn lsb_radix_sort(
    keys: &[u32],
    payloads: &[u32],
    workers: usize,
) -> Result<(Vec<u32>, Vec<u32>), OpError> {
    lsb_radix_sort_with_schedule(keys, payloads, &DEFAULT_LSB_SCHEDULE, workers)
}

/// Stable LSB sort running one pass per entry of `schedule` (bits per pass,
/// least significant first). The schedule must cover all 32 bits.
pub fn lsb_radix_sort_with_schedule(
    keys: &[u32],
    payloads: &[u32],
    schedule: &[u32],
    workers: usize,
) -> Result<(Vec<u32>, Vec<u32>), OpError> {
    check_same_len(keys.len(), payloads.len())?;
    if schedule.iter().sum::<u32>() != 32 {
        return Err(OpError::InvalidRadixPass(format!(
            "schedule {schedule:?} does not cover 32 bits"
        )));
    }
    let mut passes = Vec::with_capacity(schedule.len());
    let mut start = 0;
    for &bits in schedule {
        passes.push(RadixPass::new(start, bits, true)?);
        start += bits;
    }
    let mut cur = (keys.to_vec(), payloads.to_vec());
    let mut next = (vec![0u32; keys.len()], vec![0u32; keys.len()]);
    for pass in &passes {
        let hist = radix_histogram(&cur.0, pass, Owners::PerThread(workers.max(1)), workers)?;
        let offsets = radix_offsets(&hist);
        shuffle_into(
            &cur.0,
            &cur.1,
            pass,
            &offsets,
            &mut next.0,
            &mut next.1,
            workers,
        )?;
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

type Bucket<'a> = (&'a mut [u32], &'a mut [u32], &'a mut [u32], &'a mut [u32]);

/// MSB sort: an unstable 8-bit pass on the top byte with per-block offsets,
/// then each partition is sorted recursively on the next byte. Partitions of
/// at most 256 entries are finished with a comparison sort. Not stable.
pub fn msb_radix_sort(
    keys: &[u32],
    payloads: &[u32],
    workers: usize,
) -> Result<(Vec<u32>, Vec<u32>), OpError> {
    check_same_len(keys.len(), payloads.len())?;
    let n = keys.len();
    let mut k = keys.to_vec();
    let mut p = payloads.to_vec();
    if n <= COMPARISON_SORT_MAX {
        small_sort(&mut k, &mut p);
        return Ok((k, p));
    }
    let pass = RadixPass::new(24, 8, false)?;
    let cfg = TileConfig::custom(MSB_TOP_BLOCK.0, MSB_TOP_BLOCK.1)?;
    let hist = radix_histogram(keys, &pass, Owners::PerBlock(cfg), workers)?;
    let offsets = radix_offsets(&hist);
    shuffle_into(keys, payloads, &pass, &offsets, &mut k, &mut p, workers)?;

    let bounds = offsets.digit_bounds();
    let mut tk = vec![0u32; n];
    let mut tp = vec![0u32; n];
    let mut jobs: Vec<Bucket<'_>> = Vec::with_capacity(256);
    {
        let (mut rk, mut rp, mut rtk, mut rtp) = (&mut k[..], &mut p[..], &mut tk[..], &mut tp[..]);
        for w in bounds.windows(2) {
            let len = w[1] - w[0];
            let (a, b) = rk.split_at_mut(len);
            let (c, d) = rp.split_at_mut(len);
            let (e, f) = rtk.split_at_mut(len);
            let (g, h) = rtp.split_at_mut(len);
            if len > 1 {
                jobs.push((a, c, e, g));
            }
            (rk, rp, rtk, rtp) = (b, d, f, h);
        }
    }
    jobs.sort_by_key(|j| j.0.len());
    let queue = Mutex::new(jobs);
    run_workers(workers.max(1), |_| loop {
        let job = queue.lock().expect("job queue").pop();
        match job {
            Some((a, b, c, d)) => msb_recurse(a, b, c, d, 16),
            None => break,
        }
    });
    Ok((k, p))
}

fn msb_recurse(k: &mut [u32], p: &mut [u32], tk: &mut [u32], tp: &mut [u32], shift: u32) {
    let n = k.len();
    if n <= 1 {
        return;
    }
    if n <= COMPARISON_SORT_MAX {
        small_sort(k, p);
        return;
    }
    let mut counts = [0usize; 256];
    for &x in k.iter() {
        counts[((x >> shift) & 0xff) as usize] += 1;
    }
    let mut cursor = [0usize; 256];
    let mut acc = 0;
    for d in 0..256 {
        cursor[d] = acc;
        acc += counts[d];
    }
    for (&x, &y) in k.iter().zip(p.iter()) {
        let d = ((x >> shift) & 0xff) as usize;
        tk[cursor[d]] = x;
        tp[cursor[d]] = y;
        cursor[d] += 1;
    }
    k.copy_from_slice(tk);
    p.copy_from_slice(tp);
    if shift == 0 {
        return;
    }
    let (mut rk, mut rp, mut rtk, mut rtp) = (k, p, tk, tp);
    for &len in &counts {
        let (a, b) = rk.split_at_mut(len);
        let (c, d) = rp.split_at_mut(len);
        let (e, f) = rtk.split_at_mut(len);
        let (g, h) = rtp.split_at_mut(len);
        msb_recurse(a, c, e, g, shift - 8);
        (rk, rp, rtk, rtp) = (b, d, f, h);
    }
}

fn small_sort(k: &mut [u32], p: &mut [u32]) {
    let mut packed = [0u64; COMPARISON_SORT_MAX];
    let packed = &mut packed[..k.len()];
    for ((dst, &x), &y) in packed.iter_mut().zip(k.iter()).zip(p.iter()) {
        *dst = (u64::from(x) << 32) | u64::from(y);
    }
    packed.sort_unstable();
    for ((&v, x), y) in packed.iter().zip(k.iter_mut()).zip(p.iter_mut()) {
        *x = (v >> 32) as u32;
        *y = v as u32;
    }
}
