//! Query operators in two styles: tuned per-worker loops (the CPU
//! formulation) and tile kernels built from the block-wide functions.

pub mod hash_table;
pub mod join;
pub mod project;
pub mod radix;
pub mod select;

pub use hash_table::{LinearProbeHashTable, EMPTY_KEY};
pub use join::{
    join_probe_prefetch, join_probe_scalar, join_probe_tile, DEFAULT_PREFETCH_DISTANCE,
};
pub use project::{project_linear, project_sigmoid, project_tile, sigmoid, ProjectKind};
pub use radix::{
    lsb_radix_sort, lsb_radix_sort_with_schedule, msb_radix_sort, radix_histogram, radix_offsets,
    radix_shuffle, Owners, PartitionOffsets, RadixHistogram, RadixPass, DEFAULT_LSB_SCHEDULE,
};
pub use select::{select_atomic_cursor, select_branching, select_predicated, select_tile};

use thiserror::Error;

use crate::tile_engine::TileError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OpError {
    #[error("duplicate build key {0}")]
    DuplicateKey(i32),
    #[error("{keys} keys exceed 50% fill of a {capacity}-slot table")]
    CapacityOverflow { keys: usize, capacity: usize },
    #[error("hash table capacity {0} is not a power of two in [1, 2^32]")]
    CapacityNotPowerOfTwo(usize),
    #[error("key {0} is reserved as the empty-slot sentinel")]
    ReservedKey(i32),
    #[error("input columns differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid radix pass: {0}")]
    InvalidRadixPass(String),
    #[error("partition offsets do not match the input: {0}")]
    OffsetMismatch(String),
    #[error(transparent)]
    Tile(#[from] TileError),
}

pub(crate) fn check_same_len(left: usize, right: usize) -> Result<(), OpError> {
    if left == right {
        Ok(())
    } else {
        Err(OpError::LengthMismatch { left, right })
    }
}
