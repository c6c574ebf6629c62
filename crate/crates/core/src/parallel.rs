//! Worker-pool helpers shared by the kernel driver and the operators.
//!
//! Workers are plain scoped threads. A worker count of one runs inline on the
//! calling thread so single-threaded tests and reference runs never spawn.

use std::marker::PhantomData;
use std::mem::MaybeUninit;
use std::ops::Range;
use std::sync::OnceLock;

/// Environment variable that pins the default worker count.
pub const WORKERS_ENV: &str = "TILESCAN_WORKERS";

/// Default worker count: `TILESCAN_WORKERS` if set and positive, else the
/// machine's available parallelism.
pub fn default_workers() -> usize {
    static DEFAULT: OnceLock<usize> = OnceLock::new();
    *DEFAULT.get_or_init(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    })
}

/// Splits `0..len` into `parts` contiguous ranges whose lengths differ by at
/// most one. Empty ranges are produced when `parts > len`.
pub fn split_even(len: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1);
    let base = len / parts;
    let extra = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let size = base + usize::from(p < extra);
            let r = start..start + size;
            start += size;
            r
        })
        .collect()
}

/// Runs `f(worker_index)` on `workers` threads and returns the results in
/// worker order.
pub fn run_workers<T, F>(workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1);
    if workers == 1 {
        return vec![f(0)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn({
                    let f = &f;
                    move || f(w)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|e| std::panic::resume_unwind(e)))
            .collect()
    })
}

/// A shared, write-only view over an output buffer that several workers fill
/// at disjoint offsets.
///
/// Callers must guarantee that no two writes target the same element. The
/// kernel driver's cursor and the radix offset tables provide that guarantee.
pub struct SharedSink<'a, T> {
    ptr: *mut T,
    len: usize,
    _marker: PhantomData<&'a mut [T]>,
}

unsafe impl<T: Send> Send for SharedSink<'_, T> {}
unsafe impl<T: Send> Sync for SharedSink<'_, T> {}

impl<'a, T: Copy> SharedSink<'a, T> {
    pub fn new(buf: &'a mut [T]) -> Self {
        Self {
            ptr: buf.as_mut_ptr(),
            len: buf.len(),
            _marker: PhantomData,
        }
    }

    /// Wraps uninitialized spare capacity, e.g. `Vec::spare_capacity_mut`.
    pub fn from_uninit(buf: &'a mut [MaybeUninit<T>]) -> Self {
        Self {
            ptr: buf.as_mut_ptr().cast(),
            len: buf.len(),
            _marker: PhantomData,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Copies `src` to `[offset, offset + src.len())`. Returns `false`
    /// without writing if the range does not fit.
    ///
    /// # Safety
    /// The destination range must not be written concurrently by anyone else.
    pub unsafe fn write_slice(&self, offset: usize, src: &[T]) -> bool {
        match offset.checked_add(src.len()) {
            Some(end) if end <= self.len => {
                std::ptr::copy_nonoverlapping(src.as_ptr(), self.ptr.add(offset), src.len());
                true
            }
            _ => false,
        }
    }

    /// # Safety
    /// `index < self.len()` and no concurrent writer for the same index.
    #[inline(always)]
    pub unsafe fn write(&self, index: usize, value: T) {
        debug_assert!(index < self.len);
        self.ptr.add(index).write(value);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_even_covers_range() {
        let parts = split_even(10, 3);
        assert_eq!(parts, vec![0..4, 4..7, 7..10]);
        let parts = split_even(2, 4);
        assert_eq!(parts.iter().map(|r| r.len()).sum::<usize>(), 2);
        assert_eq!(parts.len(), 4);
        assert_eq!(split_even(0, 1), vec![0..0]);
    }

    #[test]
    fn run_workers_keeps_order() {
        let out = run_workers(4, |w| w * 10);
        assert_eq!(out, vec![0, 10, 20, 30]);
        assert_eq!(run_workers(1, |w| w), vec![0]);
    }

    #[test]
    fn sink_rejects_out_of_bounds() {
        let mut buf = vec![0i32; 4];
        let sink = SharedSink::new(&mut buf);
        unsafe {
            assert!(sink.write_slice(1, &[7, 8]));
            assert!(!sink.write_slice(3, &[1, 2]));
        }
        assert_eq!(buf, vec![0, 7, 8, 0]);
    }
}
