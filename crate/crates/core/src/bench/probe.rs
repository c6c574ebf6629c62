//! Host probing: cache sizes from sysfs and streaming memory bandwidth.

use std::path::Path;
use std::time::Instant;

use crate::cost_models::{CacheLevel, HardwareProfile, ProfileClass};
use crate::parallel::{run_workers, split_even};

use super::BenchError;

const SYSFS_CACHE: &str = "/sys/devices/system/cpu/cpu0/cache";
const MIN_PROBE_BYTES: usize = 256 << 20;

/// Parses sysfs sizes such as `32K`, `8192K` or `20M`.
pub fn parse_cache_size(s: &str) -> Option<u64> {
    let s = s.trim();
    let (digits, mult) = match s.chars().last()? {
        'K' | 'k' => (&s[..s.len() - 1], 1u64 << 10),
        'M' | 'm' => (&s[..s.len() - 1], 1 << 20),
        'G' | 'g' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits.parse::<u64>().ok().map(|d| d * mult)
}

/// Data and unified caches of cpu0, smallest first. Empty when the
/// information is unavailable.
pub fn detect_caches_in(dir: &Path) -> Vec<CacheLevel> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Vec::new();
    };
    let read = |p: &Path, f: &str| {
        std::fs::read_to_string(p.join(f))
            .ok()
            .map(|s| s.trim().to_owned())
    };
    let mut found: Vec<(u32, u64)> = Vec::new();
    for e in entries.flatten() {
        let p = e.path();
        if !p
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("index"))
        {
            continue;
        }
        if read(&p, "type").as_deref() == Some("Instruction") {
            continue;
        }
        let level = read(&p, "level").and_then(|l| l.parse().ok());
        let size = read(&p, "size").and_then(|s| parse_cache_size(&s));
        if let (Some(l), Some(s)) = (level, size) {
            found.push((l, s));
        }
    }
    found.sort_unstable();
    found.dedup_by_key(|(l, _)| *l);
    let mut levels: Vec<CacheLevel> = Vec::new();
    for (l, s) in found {
        // Profiles need strictly increasing sizes.
        if levels
            .last()
            .and_then(|c| c.size_bytes)
            .is_some_and(|prev| s <= prev)
        {
            continue;
        }
        levels.push(CacheLevel {
            name: format!("L{l}"),
            size_bytes: Some(s),
            bandwidth_bytes_per_sec: None,
        });
    }
    levels
}

pub fn detect_caches() -> Vec<CacheLevel> {
    detect_caches_in(Path::new(SYSFS_CACHE))
}

fn alloc_buffer(words: usize) -> Result<Vec<u64>, BenchError> {
    let mut v: Vec<u64> = Vec::new();
    v.try_reserve_exact(words).map_err(|_| {
        BenchError::Allocation(format!(
            "cannot allocate a {} MiB probe buffer",
            (words * 8) >> 20
        ))
    })?;
    // Touch every page so timing excludes page faults.
    v.resize(words, 1);
    Ok(v)
}

/// Best of `reps` parallel sequential read passes, in bytes per second.
pub fn measure_read_bw(buf: &[u64], workers: usize, reps: usize) -> f64 {
    let parts = split_even(buf.len(), workers.max(1));
    let mut best = 0f64;
    for _ in 0..reps.max(1) {
        let t0 = Instant::now();
        let sums = run_workers(parts.len(), |w| {
            let chunk = &buf[parts[w].clone()];
            let mut acc = [0u64; 4];
            let mut it = chunk.chunks_exact(4);
            for c in &mut it {
                for j in 0..4 {
                    acc[j] = acc[j].wrapping_add(c[j]);
                }
            }
            it.remainder()
                .iter()
                .fold(acc.iter().fold(0u64, |a, &b| a.wrapping_add(b)), |a, &b| {
                    a.wrapping_add(b)
                })
        });
        let secs = t0.elapsed().as_secs_f64();
        std::hint::black_box(sums);
        best = best.max(std::mem::size_of_val(buf) as f64 / secs);
    }
    best
}

/// Best of `reps` parallel sequential write passes, in bytes per second.
/// Uses non-temporal stores on x86_64.
pub fn measure_write_bw(buf: &mut [u64], workers: usize, reps: usize) -> f64 {
    let bytes = std::mem::size_of_val(buf) as f64;
    let workers = workers.max(1);
    let mut best = 0f64;
    for rep in 0..reps.max(1) {
        let value = rep as u64 + 7;
        let chunk_len = buf.len().div_ceil(workers).max(1);
        let t0 = Instant::now();
        std::thread::scope(|s| {
            for chunk in buf.chunks_mut(chunk_len) {
                s.spawn(move || stream_fill(chunk, value));
            }
        });
        best = best.max(bytes / t0.elapsed().as_secs_f64());
    }
    std::hint::black_box(&buf[buf.len() / 2..]);
    best
}

fn stream_fill(dst: &mut [u64], value: u64) {
    #[cfg(target_arch = "x86_64")]
    {
        use std::arch::x86_64::{_mm_sfence, _mm_stream_si64};
        for slot in dst.iter_mut() {
            // SAFETY: `slot` is a valid, aligned, exclusively borrowed u64.
            unsafe { _mm_stream_si64((slot as *mut u64).cast(), value as i64) };
        }
        // SAFETY: fence has no preconditions.
        unsafe { _mm_sfence() };
    }
    #[cfg(not(target_arch = "x86_64"))]
    dst.fill(value);
}

#[derive(Clone, Debug)]
pub struct ProbeOptions {
    /// Defaults to 4x the last-level cache, at least 256 MiB.
    pub buffer_bytes: Option<usize>,
    pub reps: usize,
    pub workers: usize,
    pub label: String,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            buffer_bytes: None,
            reps: 3,
            workers: crate::parallel::default_workers(),
            label: "probed".into(),
        }
    }
}

/// Measures the host and returns a cpu-like profile. Cache levels that
/// could not be detected are listed as L1..L3 with unknown sizes, so models
/// that need them fail with a missing-field error.
pub fn probe_hardware(opts: &ProbeOptions) -> Result<HardwareProfile, BenchError> {
    let mut caches = detect_caches();
    let llc = caches.last().and_then(|c| c.size_bytes).unwrap_or(0) as usize;
    if caches.is_empty() {
        caches = (1..=3)
            .map(|l| CacheLevel {
                name: format!("L{l}"),
                size_bytes: None,
                bandwidth_bytes_per_sec: None,
            })
            .collect();
    }
    let bytes = opts
        .buffer_bytes
        .unwrap_or_else(|| (4 * llc).max(MIN_PROBE_BYTES));
    let mut buf = alloc_buffer((bytes / 8).max(1))?;
    let read = measure_read_bw(&buf, opts.workers, opts.reps);
    let write = measure_write_bw(&mut buf, opts.workers, opts.reps);
    Ok(HardwareProfile {
        label: opts.label.clone(),
        class: ProfileClass::CpuLike,
        read_bw_bytes_per_sec: read,
        write_bw_bytes_per_sec: write,
        cache_levels: caches,
        cache_line_bytes: Some(64),
        interconnect_bw_bytes_per_sec: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sysfs_sizes() {
        assert_eq!(parse_cache_size("32K"), Some(32768));
        assert_eq!(parse_cache_size("20M\n"), Some(20 << 20));
        assert_eq!(parse_cache_size("512"), Some(512));
        assert_eq!(parse_cache_size("big"), None);
    }

    #[test]
    fn fake_sysfs_tree() {
        let dir = tempfile::tempdir().unwrap();
        for (i, (level, ty, size)) in [
            (1, "Data", "48K"),
            (1, "Instruction", "32K"),
            (2, "Unified", "2048K"),
            (3, "Unified", "30M"),
        ]
        .into_iter()
        .enumerate()
        {
            let p = dir.path().join(format!("index{i}"));
            std::fs::create_dir(&p).unwrap();
            std::fs::write(p.join("level"), format!("{level}\n")).unwrap();
            std::fs::write(p.join("type"), ty).unwrap();
            std::fs::write(p.join("size"), size).unwrap();
        }
        let levels = detect_caches_in(dir.path());
        let sizes: Vec<_> = levels
            .iter()
            .map(|c| (c.name.as_str(), c.size_bytes.unwrap()))
            .collect();
        assert_eq!(sizes, [("L1", 48 << 10), ("L2", 2 << 20), ("L3", 30 << 20)]);
        assert!(detect_caches_in(&dir.path().join("missing")).is_empty());
    }

    #[test]
    fn small_probe_is_positive() {
        let mut buf = alloc_buffer(1 << 16).unwrap();
        assert!(measure_read_bw(&buf, 2, 1) > 0.0);
        assert!(measure_write_bw(&mut buf, 2, 1) > 0.0);
        assert!(buf.iter().all(|&x| x == 7));
    }
}
