//! `SELECT f(x1, x2) FROM R` for a linear and a sigmoid combination.
//!
//! The linear form is evaluated in `f32` as `a * x1 + b * x2` with two
//! separate roundings (no fused multiply-add). The sigmoid computes the inner
//! sum and the logistic in `f64` and rounds the result to `f32` once.

use crate::parallel::{run_workers, split_even, SharedSink};
use crate::tile_engine::{block_load, Kernel, Tile};

use super::{check_same_len, OpError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProjectKind {
    Linear,
    Sigmoid,
}

impl std::str::FromStr for ProjectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear" | "q1" => Ok(ProjectKind::Linear),
            "sigmoid" | "q2" => Ok(ProjectKind::Sigmoid),
            other => Err(format!("unknown projection {other:?}")),
        }
    }
}

#[inline(always)]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline(always)]
fn linear_at(a: f32, b: f32, x1: f32, x2: f32) -> f32 {
    let l = a * x1;
    let r = b * x2;
    l + r
}

#[inline(always)]
fn sigmoid_at(a: f32, b: f32, x1: f32, x2: f32) -> f32 {
    let z = f64::from(a) * f64::from(x1) + f64::from(b) * f64::from(x2);
    sigmoid(z) as f32
}

impl ProjectKind {
    #[inline(always)]
    pub fn eval(self, a: f32, b: f32, x1: f32, x2: f32) -> f32 {
        match self {
            ProjectKind::Linear => linear_at(a, b, x1, x2),
            ProjectKind::Sigmoid => sigmoid_at(a, b, x1, x2),
        }
    }
}

pub fn project_linear(
    x1: &[f32],
    x2: &[f32],
    a: f32,
    b: f32,
    workers: usize,
) -> Result<Vec<f32>, OpError> {
    per_worker(x1, x2, workers, |p, q| linear_at(a, b, p, q))
}

pub fn project_sigmoid(
    x1: &[f32],
    x2: &[f32],
    a: f32,
    b: f32,
    workers: usize,
) -> Result<Vec<f32>, OpError> {
    per_worker(x1, x2, workers, |p, q| sigmoid_at(a, b, p, q))
}

fn per_worker(
    x1: &[f32],
    x2: &[f32],
    workers: usize,
    f: impl Fn(f32, f32) -> f32 + Sync,
) -> Result<Vec<f32>, OpError> {
    check_same_len(x1.len(), x2.len())?;
    let n = x1.len();
    let mut out = vec![0f32; n];
    let workers = workers.max(1).min(n.max(1));
    let parts = split_even(n, workers);
    let sink = SharedSink::new(&mut out);
    run_workers(workers, |w| {
        let r = parts[w].clone();
        let mut buf = [0f32; 1024];
        let mut pos = r.start;
        for (c1, c2) in x1[r.clone()].chunks(buf.len()).zip(x2[r].chunks(buf.len())) {
            for ((o, &p), &q) in buf.iter_mut().zip(c1).zip(c2) {
                *o = f(p, q);
            }
            // SAFETY: worker ranges are disjoint.
            unsafe { sink.write_slice(pos, &buf[..c1.len()]) };
            pos += c1.len();
        }
    });
    Ok(out)
}

/// Tile kernel: each block loads its tiles of both inputs, evaluates the
/// expression per slot and stores at its tile offset.
pub fn project_tile(
    x1: &[f32],
    x2: &[f32],
    a: f32,
    b: f32,
    kind: ProjectKind,
    kernel: &Kernel,
) -> Result<Vec<f32>, OpError> {
    check_same_len(x1.len(), x2.len())?;
    let config = kernel.config();
    let mut out = vec![0f32; x1.len()];
    let sink = SharedSink::new(&mut out);
    kernel.launch_with_state(
        x1.len(),
        || {
            (
                Tile::for_config(&config),
                Tile::for_config(&config),
                vec![0f32; config.tile_size()],
            )
        },
        |ctx, (t1, t2, res): &mut (Tile<f32>, Tile<f32>, Vec<f32>)| {
            block_load(x1, ctx, t1);
            block_load(x2, ctx, t2);
            let len = t1.valid_count();
            match kind {
                ProjectKind::Linear => {
                    for ((o, &p), &q) in res.iter_mut().zip(t1.as_slice()).zip(t2.as_slice()) {
                        *o = linear_at(a, b, p, q);
                    }
                }
                ProjectKind::Sigmoid => {
                    for ((o, &p), &q) in res.iter_mut().zip(t1.as_slice()).zip(t2.as_slice()) {
                        *o = sigmoid_at(a, b, p, q);
                    }
                }
            }
            // SAFETY: tiles of distinct blocks cover disjoint output ranges.
            let ok = unsafe { sink.write_slice(ctx.tile_offset(), &res[..len]) };
            debug_assert!(ok);
        },
    );
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tile_engine::TileConfig;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid_at(1.0, 1.0, 0.0, 0.0), 0.5);
        assert_eq!(
            project_sigmoid(&[], &[], 1.0, 1.0, 2).unwrap(),
            Vec::<f32>::new()
        );
    }

    #[test]
    fn tile_and_per_worker_agree_bitwise() {
        let x1: Vec<f32> = (0..3000).map(|i| i as f32 * 0.37 - 400.0).collect();
        let x2: Vec<f32> = (0..3000).map(|i| (i as f32).sin()).collect();
        let k = Kernel::new(TileConfig::new(128, 4).unwrap()).workers(3);
        for kind in [ProjectKind::Linear, ProjectKind::Sigmoid] {
            let tile = project_tile(&x1, &x2, 2.0, -0.5, kind, &k).unwrap();
            let pw = match kind {
                ProjectKind::Linear => project_linear(&x1, &x2, 2.0, -0.5, 4).unwrap(),
                ProjectKind::Sigmoid => project_sigmoid(&x1, &x2, 2.0, -0.5, 4).unwrap(),
            };
            assert!(tile
                .iter()
                .zip(&pw)
                .all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            project_linear(&[1.0], &[], 1.0, 1.0, 1),
            Err(OpError::LengthMismatch { .. })
        ));
    }
}
