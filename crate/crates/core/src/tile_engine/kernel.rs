//! Kernel driver: partitions an input into tiles and runs one logical thread
//! block per tile over a pool of workers.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::parallel::{default_workers, run_workers, split_even};

use super::TileConfig;

/// How the global output cursor hands out offsets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CursorMode {
    /// Offsets granted in ascending block id order (count phase, prefix sum,
    /// then store phase). Output is bitwise reproducible.
    #[default]
    Deterministic,
    /// Offsets granted by fetch-and-add as blocks finish staging.
    ArrivalOrder,
}

impl std::str::FromStr for CursorMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deterministic" | "det" => Ok(CursorMode::Deterministic),
            "arrival" | "arrival_order" | "arrival-order" => Ok(CursorMode::ArrivalOrder),
            other => Err(format!("unknown cursor mode {other:?}")),
        }
    }
}

/// Shared output-offset counter.
#[derive(Debug, Default)]
pub struct GlobalCursor {
    next: AtomicUsize,
}

impl GlobalCursor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Elements allocated so far.
    pub fn allocated(&self) -> usize {
        self.next.load(Ordering::Acquire)
    }

    fn fetch_add(&self, n: usize) -> usize {
        self.next.fetch_add(n, Ordering::AcqRel)
    }

    fn set(&self, n: usize) {
        self.next.store(n, Ordering::Release);
    }
}

/// An output range handed out by the cursor. Ranges granted during one
/// launch never overlap, which is what makes concurrent stores sound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Grant {
    offset: usize,
    len: usize,
}

impl Grant {
    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Identity of the logical thread block being executed.
#[derive(Clone, Copy, Debug)]
pub struct BlockContext<'a> {
    pub block_id: usize,
    pub num_blocks: usize,
    pub config: TileConfig,
    cursor: &'a GlobalCursor,
}

impl<'a> BlockContext<'a> {
    pub fn new(
        block_id: usize,
        num_blocks: usize,
        config: TileConfig,
        cursor: &'a GlobalCursor,
    ) -> Self {
        debug_assert!(block_id < num_blocks.max(1));
        Self {
            block_id,
            num_blocks,
            config,
            cursor,
        }
    }

    /// First input element covered by this block's tile.
    pub fn tile_offset(&self) -> usize {
        self.block_id * self.config.tile_size()
    }

    /// Elements of an input of length `len` that fall in this block's tile.
    pub fn tile_len(&self, len: usize) -> usize {
        len.saturating_sub(self.tile_offset())
            .min(self.config.tile_size())
    }

    pub fn cursor(&self) -> &GlobalCursor {
        self.cursor
    }
}

/// Something staged by a block that will occupy `extent` output slots.
pub trait Staged: Send {
    fn extent(&self) -> usize;
}

impl<T: Send> Staged for Vec<T> {
    fn extent(&self) -> usize {
        self.len()
    }
}

impl<T: super::Element> Staged for super::Tile<T> {
    fn extent(&self) -> usize {
        self.valid_count()
    }
}

/// Launch parameters for a tile kernel.
#[derive(Clone, Copy, Debug)]
pub struct Kernel {
    config: TileConfig,
    workers: usize,
    mode: CursorMode,
}

impl Kernel {
    pub fn new(config: TileConfig) -> Self {
        Self {
            config,
            workers: default_workers(),
            mode: CursorMode::Deterministic,
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn mode(mut self, mode: CursorMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn config(&self) -> TileConfig {
        self.config
    }

    pub fn worker_count(&self) -> usize {
        self.workers
    }

    pub fn cursor_mode(&self) -> CursorMode {
        self.mode
    }

    pub fn num_blocks(&self, input_len: usize) -> usize {
        self.config.num_tiles(input_len)
    }

    /// Runs `body` once per block. Each worker owns one state built by
    /// `init`; the final states are returned in worker order.
    pub fn launch_with_state<S, I, B>(&self, input_len: usize, init: I, body: B) -> Vec<S>
    where
        S: Send,
        I: Fn() -> S + Sync,
        B: Fn(&BlockContext<'_>, &mut S) + Sync,
    {
        let cursor = GlobalCursor::new();
        self.drive(input_len, &cursor, init, |ctx, s| body(ctx, s))
    }

    /// Runs `body` once per block and returns the per-block results in
    /// block id order, independent of scheduling.
    pub fn launch<T, S, I, B>(&self, input_len: usize, init: I, body: B) -> Vec<T>
    where
        T: Send,
        S: Send,
        I: Fn() -> S + Sync,
        B: Fn(&BlockContext<'_>, &mut S) -> T + Sync,
    {
        let cursor = GlobalCursor::new();
        let per_worker = self.drive(
            input_len,
            &cursor,
            || (init(), Vec::new()),
            |ctx, (s, out): &mut (S, Vec<(usize, T)>)| out.push((ctx.block_id, body(ctx, s))),
        );
        collect_in_block_order(
            self.num_blocks(input_len),
            per_worker.into_iter().map(|(_, v)| v),
        )
    }

    /// Runs a two-step block program that stages output, receives an output
    /// range from the global cursor, then commits into it. Returns the total
    /// number of elements allocated.
    ///
    /// In [`CursorMode::Deterministic`] every block stages first, grants are
    /// assigned by an exclusive prefix sum over block extents in block id
    /// order, and then commits run. In [`CursorMode::ArrivalOrder`] each block
    /// fetch-and-adds the cursor right after staging.
    pub fn launch_cursor<S, P, I, St, Co>(
        &self,
        input_len: usize,
        init: I,
        stage: St,
        commit: Co,
    ) -> usize
    where
        S: Send,
        P: Staged,
        I: Fn() -> S + Sync,
        St: Fn(&BlockContext<'_>, &mut S) -> P + Sync,
        Co: Fn(&BlockContext<'_>, &mut S, P, Grant) + Sync,
    {
        let cursor = GlobalCursor::new();
        match self.mode {
            CursorMode::ArrivalOrder => {
                self.drive(input_len, &cursor, &init, |ctx, s| {
                    let staged = stage(ctx, s);
                    let len = staged.extent();
                    let offset = ctx.cursor.fetch_add(len);
                    commit(ctx, s, staged, Grant { offset, len });
                });
                cursor.allocated()
            }
            CursorMode::Deterministic => {
                let num_blocks = self.num_blocks(input_len);
                let per_worker = self.drive(
                    input_len,
                    &cursor,
                    || (init(), Vec::new()),
                    |ctx, (s, out): &mut (S, Vec<(usize, P)>)| {
                        out.push((ctx.block_id, stage(ctx, s)))
                    },
                );
                let staged =
                    collect_in_block_order(num_blocks, per_worker.into_iter().map(|(_, v)| v));
                let mut running = 0usize;
                let mut work: Vec<(usize, P, Grant)> = Vec::with_capacity(staged.len());
                for (block_id, p) in staged.into_iter().enumerate() {
                    let len = p.extent();
                    work.push((
                        block_id,
                        p,
                        Grant {
                            offset: running,
                            len,
                        },
                    ));
                    running += len;
                }
                cursor.set(running);

                let workers = self.workers.min(num_blocks.max(1));
                let mut buckets: Vec<Vec<(usize, P, Grant)>> =
                    (0..workers).map(|_| Vec::new()).collect();
                let ranges = split_even(work.len(), workers);
                let mut it = work.into_iter();
                for (bucket, r) in buckets.iter_mut().zip(ranges) {
                    bucket.extend(it.by_ref().take(r.len()));
                }
                let buckets: Vec<std::sync::Mutex<Vec<(usize, P, Grant)>>> =
                    buckets.into_iter().map(std::sync::Mutex::new).collect();
                let config = self.config;
                run_workers(workers, |w| {
                    let items = std::mem::take(&mut *buckets[w].lock().expect("bucket lock"));
                    let mut s = init();
                    for (block_id, p, grant) in items {
                        let ctx = BlockContext::new(block_id, num_blocks, config, &cursor);
                        commit(&ctx, &mut s, p, grant);
                    }
                });
                running
            }
        }
    }

    /// Dynamic block scheduling: workers claim block ids from a shared
    /// counter until all blocks ran.
    fn drive<S, I, B>(&self, input_len: usize, cursor: &GlobalCursor, init: I, body: B) -> Vec<S>
    where
        S: Send,
        I: Fn() -> S + Sync,
        B: Fn(&BlockContext<'_>, &mut S) + Sync,
    {
        let num_blocks = self.num_blocks(input_len);
        let workers = self.workers.min(num_blocks.max(1));
        let next = AtomicUsize::new(0);
        let config = self.config;
        run_workers(workers, |_| {
            let mut state = init();
            loop {
                let block_id = next.fetch_add(1, Ordering::Relaxed);
                if block_id >= num_blocks {
                    break;
                }
                let ctx = BlockContext::new(block_id, num_blocks, config, cursor);
                body(&ctx, &mut state);
            }
            state
        })
    }
}

fn collect_in_block_order<T>(
    num_blocks: usize,
    per_worker: impl IntoIterator<Item = Vec<(usize, T)>>,
) -> Vec<T> {
    let mut slots: Vec<Option<T>> = (0..num_blocks).map(|_| None).collect();
    for (id, v) in per_worker.into_iter().flatten() {
        debug_assert!(slots[id].is_none(), "block {id} ran twice");
        slots[id] = Some(v);
    }
    slots
        .into_iter()
        .enumerate()
        .map(|(id, v)| v.unwrap_or_else(|| panic!("block {id} never ran")))
        .collect()
}
