//! Tile-based execution model.
//!
//! A kernel splits its input into tiles of `block_threads * items_per_thread`
//! elements and runs one logical thread block per tile. Inside a block the
//! logical threads are emulated by strided loops: thread `t` owns slots
//! `t, t + block_threads, t + 2 * block_threads, ...`. The block-wide
//! functions in [`block`] are the building blocks query kernels are composed
//! from.

pub mod block;
mod config;
mod kernel;
mod tile;

pub use block::{
    block_aggregate, block_load, block_load_at, block_load_sel, block_lookup, block_pred,
    block_scan, block_scan_into, block_shuffle, block_store, block_store_shared,
    block_thread_counts, AggKind, BlockScan,
};
pub use config::{TileConfig, BLOCK_THREADS, ITEMS_PER_THREAD};
pub use kernel::{BlockContext, CursorMode, GlobalCursor, Grant, Kernel, Staged};
pub use tile::{BlockBitmap, Combine, Element, PredKernel, Predicate, PredicateSpec, Tile};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TileError {
    #[error("invalid tile configuration: {0}")]
    InvalidConfig(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("store of {len} elements at offset {offset} exceeds capacity {capacity}")]
    OutOfBounds {
        offset: usize,
        len: usize,
        capacity: usize,
    },
}
