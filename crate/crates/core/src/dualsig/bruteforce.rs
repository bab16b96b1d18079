//! Reference implementation by explicit enumeration of multi-indices.

use ndarray::{Array2, ArrayView2};

use super::{check_pair, increment_matrix, static_gram, KernelConfig, LevelValues};
use crate::cost::Cost;
use crate::error::{Error, Result};

/// Non-decreasing multi-indices of length `m` over `0..n` in which no value
/// repeats more than `p` times, each with its weight `Π 1/c!` over the
/// multiplicities `c`.
fn weighted_indices(n: usize, m: usize, p: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(n: usize, m: usize, p: usize, start: usize, cur: &mut Vec<usize>, run: usize, w: f64, out: &mut Vec<(Vec<usize>, f64)>) {
        if cur.len() == m {
            out.push((cur.clone(), w));
            return;
        }
        for v in start..n {
            let r = if cur.last() == Some(&v) { run + 1 } else { 1 };
            if r > p {
                continue;
            }
            cur.push(v);
            rec(n, m, p, v, cur, r, w / r as f64, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, p, 0, &mut Vec::with_capacity(m), 0, 1.0, &mut out);
    out
}

fn bruteforce_levels(mats: &[Array2<f64>], n_levels: usize, p: usize) -> LevelValues {
    let mut levels = vec![1.0];
    for m in 1..=n_levels {
        let (nx, ny) = mats[m - 1].dim();
        let ix = weighted_indices(nx, m, p);
        let iy = weighted_indices(ny, m, p);
        let mut s = 0.0;
        for (i, wi) in &ix {
            for (j, wj) in &iy {
                let prod: f64 = (0..m).map(|a| mats[a][[i[a], j[a]]]).product();
                s += wi * wj * prod;
            }
        }
        levels.push(s);
    }
    LevelValues(levels)
}

/// Truncated order-`p` signature kernel by direct summation. Exponential in
/// the truncation level; meant for short sequences.
pub fn sig_kernel_bruteforce(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<LevelValues> {
    check_pair(x, y, cfg)?;
    let g = static_gram(&cfg.static_kernel, x, y, &mut Cost::default());
    let a = increment_matrix(g.view(), cfg.difference);
    let mats = vec![a; cfg.n_levels];
    Ok(bruteforce_levels(&mats, cfg.n_levels, cfg.effective_order()))
}

/// Brute-force kernel where position `a` of every multi-index uses its own
/// static Gram matrix `grams[a]` (points of `x` by points of `y`); the
/// truncation level is `grams.len()`.
pub fn sig_kernel_bruteforce_from_static_grams(grams: &[Array2<f64>], order: super::Order, difference: bool) -> Result<LevelValues> {
    let mats = prepare_grams(grams, difference)?;
    Ok(bruteforce_levels(&mats, grams.len(), order.resolve(grams.len())))
}

pub(super) fn prepare_grams(grams: &[Array2<f64>], difference: bool) -> Result<Vec<Array2<f64>>> {
    if let Some(first) = grams.first() {
        if let Some(g) = grams.iter().find(|g| g.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.len(),
                got: g.len(),
            });
        }
        if grams.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("static gram"));
        }
    }
    Ok(grams.iter().map(|g| increment_matrix(g.view(), difference)).collect())
}
