use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{SeedStream, SequenceBatch};
use crate::error::{Error, Result};

/// `n` Brownian paths on `[0, 1]` sampled at `len` equispaced points.
///
/// Each path starts at the origin; increments are independent Gaussians with
/// variance `1 / (len - 1)` per channel. Sequence `i` draws from
/// `seed.child("brownian").index(i)`, so the output does not depend on the
/// number of worker threads.
pub fn gen_brownian(n: usize, len: usize, dim: usize, seed: &SeedStream) -> Result<SequenceBatch> {
    gen_brownian_with_drift(n, len, dim, &vec![0.0; dim], seed)
}

/// Brownian paths whose increments carry a constant mean `drift` (one entry
/// per channel, added to every increment).
pub fn gen_brownian_with_drift(
    n: usize,
    len: usize,
    dim: usize,
    drift: &[f64],
    seed: &SeedStream,
) -> Result<SequenceBatch> {
    if len < 2 {
        return Err(Error::invalid(format!("brownian paths need len >= 2, got {len}")));
    }
    if n == 0 || dim == 0 {
        return Err(Error::invalid("brownian batch needs n >= 1 and dim >= 1"));
    }
    if drift.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: drift.len(),
        });
    }
    let sd = (1.0 / (len - 1) as f64).sqrt();
    let base = seed.child("brownian");
    let paths: Vec<Array2<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = base.index(i).rng();
            let mut path = Array2::zeros((len, dim));
            for t in 1..len {
                for c in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    path[[t, c]] = path[[t - 1, c]] + drift[c] + sd * z;
                }
            }
            path
        })
        .collect();
    let mut data = Array3::zeros((n, len, dim));
    for (i, p) in paths.iter().enumerate() {
        data.index_axis_mut(Axis(0), i).assign(p);
    }
    SequenceBatch::new(data)
}
