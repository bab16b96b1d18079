//! Order-`p` dynamic program over the increment matrix.
//!
//! `R[q][r][i, j]` accumulates the weighted products over pairs of
//! multi-indices ending at `(i, j)` whose last index repeats exactly `q`
//! times in `x` and `r` times in `y`. Appending position `m` either opens a
//! new index (a strict prefix sum over earlier indices) or extends a run,
//! which divides the weight by the new run length.

use ndarray::{Array2, ArrayView2};

use super::bruteforce::prepare_grams;
use super::{check_pair, increment_matrix, static_gram, KernelConfig, LevelValues, Order};
use crate::cost::Cost;
use crate::error::Result;

pub(crate) fn dp_levels<'a>(a_of: impl Fn(usize) -> ArrayView2<'a, f64>, n_levels: usize, p: usize, cost: &mut Cost) -> LevelValues {
    let mut levels = vec![1.0];
    if n_levels == 0 {
        return LevelValues(levels);
    }
    let (nx, ny) = a_of(0).dim();
    let cells = nx * ny;
    let slot = |q: usize, r: usize| (q - 1) * p + (r - 1);
    let mut prev: Vec<Vec<f64>> = vec![Vec::new(); p * p];
    let mut next: Vec<Vec<f64>> = vec![Vec::new(); p * p];
    let mut scratch = vec![0.0; cells];
    cost.observe_floats((2 * p * p + 2) * cells);

    for m in 1..=n_levels {
        let a = a_of(m - 1);
        let a = a.as_standard_layout();
        let a = a.as_slice().expect("standard layout");
        let qmax = m.min(p);
        for v in next.iter_mut() {
            v.clear();
        }
        if m == 1 {
            next[slot(1, 1)] = a.to_vec();
        } else {
            let pmax = (m - 1).min(p);
            // new index in both sequences
            scratch.iter_mut().for_each(|s| *s = 0.0);
            for q in 1..=pmax {
                for r in 1..=pmax {
                    let src = &prev[slot(q, r)];
                    if !src.is_empty() {
                        scratch.iter_mut().zip(src).for_each(|(s, v)| *s += v);
                    }
                }
            }
            let mut r11 = vec![0.0; cells];
            let mut col = vec![0.0; ny];
            for i in 0..nx {
                let mut row_acc = 0.0;
                for j in 0..ny {
                    // col[j] holds Σ_{i'<i} S[i', j]; row_acc holds Σ_{j'<j} col[j']
                    r11[i * ny + j] = a[i * ny + j] * row_acc;
                    row_acc += col[j];
                }
                for j in 0..ny {
                    col[j] += scratch[i * ny + j];
                }
            }
            next[slot(1, 1)] = r11;
            // run extended in x, new index in y
            for q in 2..=qmax {
                let mut t = vec![0.0; cells];
                for r in 1..=pmax {
                    let src = &prev[slot(q - 1, r)];
                    if !src.is_empty() {
                        t.iter_mut().zip(src).for_each(|(s, v)| *s += v);
                    }
                }
                let inv = 1.0 / q as f64;
                for i in 0..nx {
                    let mut acc = 0.0;
                    for j in 0..ny {
                        let c = i * ny + j;
                        let tv = t[c];
                        t[c] = inv * a[c] * acc;
                        acc += tv;
                    }
                }
                next[slot(q, 1)] = t;
            }
            // new index in x, run extended in y
            for r in 2..=qmax {
                let mut t = vec![0.0; cells];
                for q in 1..=pmax {
                    let src = &prev[slot(q, r - 1)];
                    if !src.is_empty() {
                        t.iter_mut().zip(src).for_each(|(s, v)| *s += v);
                    }
                }
                let inv = 1.0 / r as f64;
                let mut acc = vec![0.0; ny];
                for i in 0..nx {
                    for j in 0..ny {
                        let c = i * ny + j;
                        let tv = t[c];
                        t[c] = inv * a[c] * acc[j];
                        acc[j] += tv;
                    }
                }
                next[slot(1, r)] = t;
            }
            // runs extended in both
            for q in 2..=qmax {
                for r in 2..=qmax {
                    let src = &prev[slot(q - 1, r - 1)];
                    if src.is_empty() {
                        continue;
                    }
                    let inv = 1.0 / (q * r) as f64;
                    next[slot(q, r)] = src.iter().zip(a).map(|(v, av)| inv * av * v).collect();
                }
            }
        }
        cost.add_flops(cells * (3 * qmax * qmax + 4));
        let km: f64 = next.iter().map(|v| v.iter().sum::<f64>()).sum();
        levels.push(km);
        std::mem::swap(&mut prev, &mut next);
    }
    LevelValues(levels)
}

/// Truncated order-`p` signature kernel by dynamic programming, in
/// `O(M p² L_x L_y)` time.
pub fn sig_kernel_dp(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<LevelValues> {
    sig_kernel_dp_with_cost(x, y, cfg).map(|(v, _)| v)
}

pub fn sig_kernel_dp_with_cost(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<(LevelValues, Cost)> {
    check_pair(x, y, cfg)?;
    let mut cost = Cost::default();
    let g = static_gram(&cfg.static_kernel, x, y, &mut cost);
    let a = increment_matrix(g.view(), cfg.difference);
    cost.add_flops(3 * a.len());
    let v = dp_levels(|_| a.view(), cfg.n_levels, cfg.effective_order(), &mut cost);
    cost.observe_floats((2 * cfg.effective_order().pow(2) + 2) * a.len() + g.len());
    Ok((v, cost))
}

/// Dynamic program where level position `a` uses its own static Gram
/// matrix `grams[a]`; the truncation level is `grams.len()`.
pub fn sig_kernel_dp_from_static_grams(grams: &[Array2<f64>], order: Order, difference: bool) -> Result<LevelValues> {
    let mats = prepare_grams(grams, difference)?;
    Ok(dp_levels(|a| mats[a].view(), mats.len(), order.resolve(mats.len()), &mut Cost::default()))
}
