use std::fmt;
use std::str::FromStr;

use super::TileError;

/// Logical threads per block allowed by [`TileConfig::new`].
pub const BLOCK_THREADS: [usize; 6] = [32, 64, 128, 256, 512, 1024];
/// Items per thread allowed by [`TileConfig::new`].
pub const ITEMS_PER_THREAD: [usize; 4] = [1, 2, 4, 8];

/// Shape of the unit of block-cooperative work: `block_threads` logical
/// threads each owning `items_per_thread` slots of a tile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TileConfig {
    block_threads: usize,
    items_per_thread: usize,
}

impl TileConfig {
    /// A config from the standard sweep: `block_threads` in
    /// [`BLOCK_THREADS`], `items_per_thread` in [`ITEMS_PER_THREAD`].
    pub fn new(block_threads: usize, items_per_thread: usize) -> Result<Self, TileError> {
        if !BLOCK_THREADS.contains(&block_threads) {
            return Err(TileError::InvalidConfig(format!(
                "block_threads {block_threads} not in {BLOCK_THREADS:?}"
            )));
        }
        if !ITEMS_PER_THREAD.contains(&items_per_thread) {
            return Err(TileError::InvalidConfig(format!(
                "items_per_thread {items_per_thread} not in {ITEMS_PER_THREAD:?}"
            )));
        }
        Ok(Self {
            block_threads,
            items_per_thread,
        })
    }

    /// Any positive shape. Used for small illustrative tiles (4 threads x 4
    /// items) and odd tile sizes; rejects zero.
    pub fn custom(block_threads: usize, items_per_thread: usize) -> Result<Self, TileError> {
        if block_threads == 0 || items_per_thread == 0 {
            return Err(TileError::InvalidConfig(format!(
                "tile size must be positive (got {block_threads} x {items_per_thread})"
            )));
        }
        block_threads
            .checked_mul(items_per_thread)
            .ok_or_else(|| TileError::InvalidConfig("tile size overflows".into()))?;
        Ok(Self {
            block_threads,
            items_per_thread,
        })
    }

    pub fn block_threads(&self) -> usize {
        self.block_threads
    }

    pub fn items_per_thread(&self) -> usize {
        self.items_per_thread
    }

    pub fn tile_size(&self) -> usize {
        self.block_threads * self.items_per_thread
    }

    /// Number of tiles needed to cover `len` elements.
    pub fn num_tiles(&self, len: usize) -> usize {
        len.div_ceil(self.tile_size())
    }

    /// Every standard shape, block threads outer.
    pub fn sweep() -> impl Iterator<Item = TileConfig> {
        BLOCK_THREADS.into_iter().flat_map(|bt| {
            ITEMS_PER_THREAD.into_iter().map(move |ipt| TileConfig {
                block_threads: bt,
                items_per_thread: ipt,
            })
        })
    }
}

impl Default for TileConfig {
    /// 128 threads x 4 items.
    fn default() -> Self {
        Self {
            block_threads: 128,
            items_per_thread: 4,
        }
    }
}

impl fmt::Display for TileConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.block_threads, self.items_per_thread)
    }
}

impl FromStr for TileConfig {
    type Err = TileError;

    /// Parses `"<threads>x<items>"`, e.g. `"256x8"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (bt, ipt) = s.split_once(['x', 'X']).ok_or_else(|| {
            TileError::InvalidConfig(format!("expected <threads>x<items>, got {s:?}"))
        })?;
        let parse = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|e| TileError::InvalidConfig(format!("{v:?}: {e}")))
        };
        TileConfig::new(parse(bt)?, parse(ipt)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tile_size_is_product() {
        let c = TileConfig::new(256, 8).unwrap();
        assert_eq!(c.tile_size(), 2048);
        assert_eq!(TileConfig::default().tile_size(), 512);
    }

    #[test]
    fn rejects_out_of_sweep_shapes() {
        assert!(TileConfig::new(100, 4).is_err());
        assert!(TileConfig::new(128, 3).is_err());
        assert!(TileConfig::custom(0, 4).is_err());
        assert!(TileConfig::custom(4, 0).is_err());
        assert_eq!(TileConfig::custom(4, 4).unwrap().tile_size(), 16);
    }

    #[test]
    fn num_tiles_rounds_up() {
        let c = TileConfig::new(1024, 1).unwrap();
        assert_eq!(c.num_tiles(1_000_000), 977);
        assert_eq!(c.num_tiles(0), 0);
    }

    #[test]
    fn parse_and_display() {
        let c: TileConfig = "256x8".parse().unwrap();
        assert_eq!(c.to_string(), "256x8");
        assert!("256".parse::<TileConfig>().is_err());
        assert_eq!(TileConfig::sweep().count(), 24);
    }
}
