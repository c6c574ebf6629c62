//! Open-addressing hash table with linear probing.
//!
//! Each slot packs a 4-byte key and a 4-byte payload into one `u64`, so a
//! probe touches a single 8-byte slot and no pointers are followed.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::parallel::{run_workers, split_even};

use super::OpError;

/// Reserved key marking an empty slot. Keys equal to it cannot be stored.
pub const EMPTY_KEY: i32 = i32::MIN;

/// Fibonacci hashing multiplier (2^32 / golden ratio).
const FIB_MULTIPLIER: u32 = 2_654_435_769;

const EMPTY_SLOT: u64 = pack(EMPTY_KEY, 0);

#[inline(always)]
const fn pack(key: i32, payload: i32) -> u64 {
    ((payload as u32 as u64) << 32) | key as u32 as u64
}

#[inline(always)]
const fn slot_key(slot: u64) -> i32 {
    slot as u32 as i32
}

#[inline(always)]
const fn slot_payload(slot: u64) -> i32 {
    (slot >> 32) as u32 as i32
}

#[derive(Clone, Debug)]
pub struct LinearProbeHashTable {
    slots: Vec<u64>,
    bits: u32,
    len: usize,
}

impl LinearProbeHashTable {
    /// Builds the table single-threaded. Duplicate detection is exact.
    pub fn build(keys: &[i32], payloads: &[i32], capacity: usize) -> Result<Self, OpError> {
        let bits = check_build_args(keys, payloads, capacity)?;
        let mask = capacity - 1;
        let mut slots = vec![EMPTY_SLOT; capacity];
        for (&k, &p) in keys.iter().zip(payloads) {
            let mut i = home_slot(k, bits);
            loop {
                let existing = slot_key(slots[i]);
                if existing == EMPTY_KEY {
                    slots[i] = pack(k, p);
                    break;
                }
                if existing == k {
                    return Err(OpError::DuplicateKey(k));
                }
                i = (i + 1) & mask;
            }
        }
        Ok(Self {
            slots,
            bits,
            len: keys.len(),
        })
    }

    /// Builds the table with `workers` threads. Each insert claims a slot with
    /// a compare-and-swap of the whole (key, payload) word.
    pub fn build_parallel(
        keys: &[i32],
        payloads: &[i32],
        capacity: usize,
        workers: usize,
    ) -> Result<Self, OpError> {
        if workers <= 1 || keys.len() < 4096 {
            return Self::build(keys, payloads, capacity);
        }
        let bits = check_build_args(keys, payloads, capacity)?;
        let mask = capacity - 1;
        let slots: Vec<AtomicU64> = (0..capacity).map(|_| AtomicU64::new(EMPTY_SLOT)).collect();
        let parts = split_even(keys.len(), workers);
        let results = run_workers(workers, |w| {
            for j in parts[w].clone() {
                let (k, p) = (keys[j], payloads[j]);
                let packed = pack(k, p);
                let mut i = home_slot(k, bits);
                loop {
                    match slots[i].compare_exchange(
                        EMPTY_SLOT,
                        packed,
                        Ordering::AcqRel,
                        Ordering::Acquire,
                    ) {
                        Ok(_) => break,
                        Err(existing) if slot_key(existing) == k => {
                            return Err(OpError::DuplicateKey(k))
                        }
                        Err(_) => i = (i + 1) & mask,
                    }
                }
            }
            Ok(())
        });
        results.into_iter().collect::<Result<(), _>>()?;
        let slots = slots.into_iter().map(AtomicU64::into_inner).collect();
        Ok(Self {
            slots,
            bits,
            len: keys.len(),
        })
    }

    /// An empty table of the given capacity; every probe misses.
    pub fn empty(capacity: usize) -> Result<Self, OpError> {
        Self::build(&[], &[], capacity)
    }

    #[inline(always)]
    pub fn probe(&self, key: i32) -> Option<i32> {
        if key == EMPTY_KEY {
            return None;
        }
        let mask = self.slots.len() - 1;
        let mut i = home_slot(key, self.bits);
        for _ in 0..self.slots.len() {
            let s = self.slots[i];
            let k = slot_key(s);
            if k == key {
                return Some(slot_payload(s));
            }
            if k == EMPTY_KEY {
                return None;
            }
            i = (i + 1) & mask;
        }
        None
    }

    /// Number of slots inspected by `probe(key)`.
    pub fn probe_length(&self, key: i32) -> usize {
        let mask = self.slots.len() - 1;
        let mut i = home_slot(key, self.bits);
        for step in 1..=self.slots.len() {
            let k = slot_key(self.slots[i]);
            if k == key || k == EMPTY_KEY {
                return step;
            }
            i = (i + 1) & mask;
        }
        self.slots.len()
    }

    /// Slot index where probing for `key` starts.
    #[inline(always)]
    pub fn home(&self, key: i32) -> usize {
        home_slot(key, self.bits)
    }

    /// Address of a slot, for prefetch hints.
    #[inline(always)]
    pub fn slot_ptr(&self, index: usize) -> *const u64 {
        self.slots[index..].as_ptr()
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn fill_ratio(&self) -> f64 {
        self.len as f64 / self.slots.len() as f64
    }

    /// Table footprint in bytes (8 bytes per slot).
    pub fn size_bytes(&self) -> usize {
        self.slots.len() * std::mem::size_of::<u64>()
    }
}

#[inline(always)]
fn home_slot(key: i32, bits: u32) -> usize {
    let h = (key as u32).wrapping_mul(FIB_MULTIPLIER) as u64;
    (h >> (32 - bits)) as usize
}

fn check_build_args(keys: &[i32], payloads: &[i32], capacity: usize) -> Result<u32, OpError> {
    if keys.len() != payloads.len() {
        return Err(OpError::LengthMismatch {
            left: keys.len(),
            right: payloads.len(),
        });
    }
    if !capacity.is_power_of_two() || capacity > 1 << 32 {
        return Err(OpError::CapacityNotPowerOfTwo(capacity));
    }
    if keys.len().saturating_mul(2) > capacity {
        return Err(OpError::CapacityOverflow {
            keys: keys.len(),
            capacity,
        });
    }
    if keys.contains(&EMPTY_KEY) {
        return Err(OpError::ReservedKey(EMPTY_KEY));
    }
    Ok(capacity.trailing_zeros())
}
