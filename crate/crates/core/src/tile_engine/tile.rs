use std::fmt::Debug;

use super::{TileConfig, TileError};

/// A fixed-width element a tile can hold.
pub trait Element: Copy + Default + PartialOrd + Debug + Send + Sync + 'static {}

impl Element for i32 {}
impl Element for u32 {}
impl Element for f32 {}
impl Element for i64 {}
impl Element for u64 {}

/// Block-private staging buffer holding up to `tile_size` elements.
///
/// Only the first `valid_count` slots are meaningful. After a selective load
/// some of those slots are undefined as well; debug builds track which slots
/// were written and panic on reads of the others.
#[derive(Clone, Debug)]
pub struct Tile<T> {
    items: Vec<T>,
    valid: usize,
    #[cfg(debug_assertions)]
    defined: Vec<bool>,
}

impl<T: Element> Tile<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: vec![T::default(); capacity],
            valid: 0,
            #[cfg(debug_assertions)]
            defined: vec![false; capacity],
        }
    }

    pub fn for_config(config: &TileConfig) -> Self {
        Self::new(config.tile_size())
    }

    /// A fully defined tile holding `values` (capacity = `values.len()`).
    pub fn from_slice(values: &[T]) -> Self {
        let mut t = Self::new(values.len());
        t.fill_from(values);
        t
    }

    pub fn capacity(&self) -> usize {
        self.items.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid
    }

    pub fn is_empty(&self) -> bool {
        self.valid == 0
    }

    #[inline(always)]
    pub fn get(&self, i: usize) -> T {
        debug_assert!(
            i < self.valid,
            "tile read past valid_count ({i} >= {})",
            self.valid
        );
        #[cfg(debug_assertions)]
        assert!(self.defined[i], "read of undefined tile slot {i}");
        self.items[i]
    }

    /// The valid prefix. Every slot in it must be defined.
    pub fn as_slice(&self) -> &[T] {
        #[cfg(debug_assertions)]
        assert!(
            self.defined[..self.valid].iter().all(|&d| d),
            "as_slice over a tile with undefined slots"
        );
        &self.items[..self.valid]
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.as_slice().to_vec()
    }

    /// Copies `src` into the front of the tile and makes it the valid prefix.
    pub(crate) fn fill_from(&mut self, src: &[T]) {
        assert!(
            src.len() <= self.items.len(),
            "source longer than tile capacity"
        );
        self.items[..src.len()].copy_from_slice(src);
        self.valid = src.len();
        #[cfg(debug_assertions)]
        {
            self.defined[..src.len()].fill(true);
            self.defined[src.len()..].fill(false);
        }
    }

    /// Starts a new logical tile of `valid` slots with nothing defined yet.
    pub(crate) fn begin(&mut self, valid: usize) {
        debug_assert!(valid <= self.items.len());
        self.valid = valid;
        #[cfg(debug_assertions)]
        self.defined.fill(false);
    }

    #[inline(always)]
    pub(crate) fn put(&mut self, i: usize, v: T) {
        self.items[i] = v;
        #[cfg(debug_assertions)]
        {
            self.defined[i] = true;
        }
    }

    /// Raw slot storage for branch-free writers. Callers must `mark_defined`
    /// the prefix they wrote.
    pub(crate) fn raw_mut(&mut self) -> &mut [T] {
        &mut self.items
    }

    pub(crate) fn mark_defined(&mut self, _upto: usize) {
        #[cfg(debug_assertions)]
        {
            self.defined[.._upto].fill(true);
            self.defined[_upto..].fill(false);
        }
    }
}

/// One flag per tile slot; flags at or beyond `len` are always false.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockBitmap {
    flags: Vec<bool>,
    len: usize,
}

impl BlockBitmap {
    pub fn new(capacity: usize) -> Self {
        Self {
            flags: vec![false; capacity],
            len: 0,
        }
    }

    pub fn from_flags(flags: &[bool]) -> Self {
        Self {
            flags: flags.to_vec(),
            len: flags.len(),
        }
    }

    /// `len` leading flags all set to `value`.
    pub fn filled(capacity: usize, len: usize, value: bool) -> Self {
        let mut b = Self::new(capacity.max(len));
        b.reset(len, value);
        b
    }

    /// Number of tile slots this bitmap describes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags[..self.len]
    }

    #[inline(always)]
    pub fn get(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn count(&self) -> usize {
        self.flags().iter().filter(|&&f| f).count()
    }

    pub(crate) fn reset(&mut self, len: usize, value: bool) {
        if self.flags.len() < len {
            self.flags.resize(len, false);
        }
        self.len = len;
        self.flags[..len].fill(value);
        self.flags[len..].fill(false);
    }

    pub(crate) fn flags_mut(&mut self) -> &mut [bool] {
        &mut self.flags[..self.len]
    }
}

/// Comparison applied to each element of a tile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Predicate<T> {
    Lt(T),
    Le(T),
    Gt(T),
    Ge(T),
    Eq(T),
    /// Inclusive on both ends; requires `lo <= hi`.
    Between(T, T),
}

impl<T: Element> Predicate<T> {
    pub fn between(lo: T, hi: T) -> Result<Self, TileError> {
        let p = Predicate::Between(lo, hi);
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), TileError> {
        match self {
            Predicate::Between(lo, hi)
                if !matches!(
                    lo.partial_cmp(hi),
                    Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
                ) =>
            {
                Err(TileError::ContractViolation(format!(
                    "BETWEEN bounds out of order: {lo:?} > {hi:?}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline(always)]
    pub fn eval(&self, x: T) -> bool {
        match *self {
            Predicate::Lt(v) => x < v,
            Predicate::Le(v) => x <= v,
            Predicate::Gt(v) => x > v,
            Predicate::Ge(v) => x >= v,
            Predicate::Eq(v) => x == v,
            Predicate::Between(lo, hi) => x >= lo && x <= hi,
        }
    }

    /// Calls `f` with a closure specialised for this predicate so hot loops
    /// do not re-dispatch on the variant per element.
    #[inline(always)]
    pub fn with_kernel<R>(&self, f: impl PredKernel<T, Output = R>) -> R {
        match *self {
            Predicate::Lt(v) => f.run(move |x: T| x < v),
            Predicate::Le(v) => f.run(move |x: T| x <= v),
            Predicate::Gt(v) => f.run(move |x: T| x > v),
            Predicate::Ge(v) => f.run(move |x: T| x >= v),
            Predicate::Eq(v) => f.run(move |x: T| x == v),
            Predicate::Between(lo, hi) => f.run(move |x: T| x >= lo && x <= hi),
        }
    }
}

/// A loop body generic over a monomorphised predicate closure.
pub trait PredKernel<T> {
    type Output;
    fn run<P: Fn(T) -> bool + Copy>(self, pred: P) -> Self::Output;
}

/// How `block_pred` combines with an existing bitmap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Combine {
    /// Overwrite the bitmap.
    Init,
    /// Fold into the bitmap with logical AND.
    And,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredicateSpec<T> {
    pub predicate: Predicate<T>,
    pub combine: Combine,
}

impl<T: Element> PredicateSpec<T> {
    pub fn init(predicate: Predicate<T>) -> Self {
        Self {
            predicate,
            combine: Combine::Init,
        }
    }

    pub fn and(predicate: Predicate<T>) -> Self {
        Self {
            predicate,
            combine: Combine::And,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predicate_eval() {
        assert!(Predicate::Gt(5).eval(6));
        assert!(!Predicate::Gt(5).eval(5));
        assert!(Predicate::Between(1, 3).eval(3));
        assert!(Predicate::between(3, 1).is_err());
        assert!(Predicate::Le(2.5f32).eval(2.5));
    }

    #[test]
    fn bitmap_reset_clears_tail() {
        let mut b = BlockBitmap::filled(8, 8, true);
        b.reset(3, true);
        assert_eq!(b.count(), 3);
        assert_eq!(b.flags(), &[true, true, true]);
        assert!(!b.get(5));
    }

    #[test]
    #[cfg(debug_assertions)]
    #[should_panic(expected = "undefined")]
    fn reading_undefined_slot_panics_in_debug() {
        let mut t = Tile::<i32>::new(4);
        t.begin(4);
        t.put(0, 1);
        let _ = t.get(1);
    }
}
