//! Microbenchmark and SSB drivers, hardware probing and report records.

mod probe;
mod report;
mod workloads;

pub use probe::{
    detect_caches, detect_caches_in, measure_read_bw, measure_write_bw, parse_cache_size,
    probe_hardware, ProbeOptions,
};
pub use report::{time_reps, BenchReport};
pub use workloads::{
    bench_join, bench_project, bench_select, bench_sort, bench_ssb, join_inputs, q21_params_for,
    select_threshold, uniform_f32, uniform_i32, uniform_u32, BenchEnv, JoinVariant, ProjectVariant,
    SelectVariant, SortAlgo, SsbRun, SELECT_DOMAIN,
};

use thiserror::Error;

use crate::cost_models::ModelError;
use crate::operators::OpError;
use crate::ssb_queries::QueryError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid quantity {0:?}")]
    InvalidQuantity(String),
    #[error("{0}")]
    Allocation(String),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parses counts and byte sizes: `1024`, `2^29`, `120e6`, `12.8e9`, `8KB`,
/// `6MiB`, `1GB`. Size suffixes are binary (`KB` = `KiB` = 1024).
pub fn parse_quantity(s: &str) -> Result<f64, BenchError> {
    let bad = || BenchError::InvalidQuantity(s.to_owned());
    let t = s.trim().replace('_', "");
    let upper = t.to_ascii_uppercase();
    let suffixes: [(&str, f64); 9] = [
        ("KIB", 1024.0),
        ("MIB", 1024.0 * 1024.0),
        ("GIB", 1024.0 * 1024.0 * 1024.0),
        ("KB", 1024.0),
        ("MB", 1024.0 * 1024.0),
        ("GB", 1024.0 * 1024.0 * 1024.0),
        ("K", 1024.0),
        ("M", 1024.0 * 1024.0),
        ("G", 1024.0 * 1024.0 * 1024.0),
    ];
    let (num, mult) = suffixes
        .iter()
        .find(|(suf, _)| upper.ends_with(suf))
        .map(|&(suf, m)| (&t[..t.len() - suf.len()], m))
        .unwrap_or((&t[..], 1.0));
    let value = if let Some((base, exp)) = num.split_once('^') {
        let b: f64 = base.trim().parse().map_err(|_| bad())?;
        let e: i32 = exp.trim().parse().map_err(|_| bad())?;
        b.powi(e)
    } else {
        num.trim().parse::<f64>().map_err(|_| bad())?
    };
    let v = value * mult;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Like [`parse_quantity`] but requires a whole number.
pub fn parse_count(s: &str) -> Result<usize, BenchError> {
    let v = parse_quantity(s)?;
    if v.fract() != 0.0 || v > usize::MAX as f64 {
        return Err(BenchError::InvalidQuantity(s.to_owned()));
    }
    Ok(v as usize)
}

/// Powers of two from `min` to `max` inclusive. Both bounds must be powers
/// of two with `min <= max`.
pub fn pow2_sweep(min: usize, max: usize) -> Result<Vec<usize>, BenchError> {
    if !min.is_power_of_two() || !max.is_power_of_two() || min > max {
        return Err(BenchError::InvalidSweep(format!(
            "bounds must be powers of two with min <= max, got {min}..{max}"
        )));
    }
    Ok(std::iter::successors(Some(min), |&x| (x < max).then(|| x * 2)).collect())
}

/// `0, step, 2 * step, ..., 1`.
pub fn fraction_sweep(step: f64) -> Result<Vec<f64>, BenchError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(BenchError::InvalidSweep(format!(
            "step must lie in (0, 1], got {step}"
        )));
    }
    let k = (1.0 / step).round() as usize;
    if ((k as f64) * step - 1.0).abs() > 1e-9 {
        return Err(BenchError::InvalidSweep(format!(
            "step {step} does not divide 1"
        )));
    }
    Ok((0..=k).map(|i| i as f64 / k as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantities() {
        assert_eq!(parse_quantity("2^29").unwrap(), 536870912.0);
        assert_eq!(parse_quantity("120e6").unwrap(), 120e6);
        assert_eq!(parse_quantity("12.8e9").unwrap(), 12.8e9);
        assert_eq!(parse_quantity("8KB").unwrap(), 8192.0);
        assert_eq!(parse_quantity("1GB").unwrap(), 1073741824.0);
        assert_eq!(parse_quantity("6MiB").unwrap(), 6291456.0);
        assert_eq!(parse_quantity("1_000").unwrap(), 1000.0);
        assert!(parse_quantity("-1").is_err());
        assert!(parse_quantity("lots").is_err());
        assert_eq!(parse_count("2^10").unwrap(), 1024);
        assert!(parse_count("1.5").is_err());
    }

    #[test]
    fn sweeps() {
        assert_eq!(
            pow2_sweep(8192, 65536).unwrap(),
            vec![8192, 16384, 32768, 65536]
        );
        assert_eq!(pow2_sweep(4, 4).unwrap(), vec![4]);
        assert!(pow2_sweep(16, 8).is_err());
        assert!(pow2_sweep(3, 8).is_err());
        let s = fraction_sweep(0.1).unwrap();
        assert_eq!(s.len(), 11);
        assert_eq!(s[3], 0.3);
        assert!(fraction_sweep(0.3).is_err());
        assert!(fraction_sweep(0.0).is_err());
    }
}
