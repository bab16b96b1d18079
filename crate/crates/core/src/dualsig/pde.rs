//! Finite-difference solver for the signature kernel PDE.
//!
//! The grid is swept by antidiagonals `s = k + l`. Only the last three
//! antidiagonals of the solution and of the static kernel are kept, so the
//! working set is linear in `L_x + L_y`.

use ndarray::ArrayView2;

use super::{check_pair, KernelConfig};
use crate::cost::Cost;
use crate::error::Result;

/// Untruncated signature kernel `K̂(L_x, L_y)` on the grid given by the
/// sequence points. `cfg.n_levels` and `cfg.order` are ignored.
pub fn sig_pde_kernel(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<f64> {
    sig_pde_kernel_with_cost(x, y, cfg).map(|(v, _)| v)
}

pub fn sig_pde_kernel_with_cost(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<(f64, Cost)> {
    check_pair(x, y, cfg)?;
    let spec = &cfg.static_kernel;
    let d = x.ncols();
    let (lx, ly) = (x.nrows(), y.nrows());
    let mut cost = Cost::default();

    // Increment grid: A is nx × ny. With differencing A[k-1][l-1] reads
    // static values at points (k-1..=k, l-1..=l); otherwise A[k][l] = k(x_k, y_l).
    let (nx, ny) = if cfg.difference { (lx - 1, ly - 1) } else { (lx, ly) };
    if nx == 0 || ny == 0 {
        return Ok((1.0, cost));
    }

    // Static kernel on point antidiagonals, indexed by the x-point index.
    let point_diag = |s: usize, buf: &mut Vec<f64>, cost: &mut Cost| {
        buf.clear();
        buf.resize(lx, 0.0);
        let lo = s.saturating_sub(ly - 1);
        let hi = s.min(lx - 1);
        for i in lo..=hi {
            buf[i] = spec.eval_unchecked(x.row(i), y.row(s - i));
        }
        cost.add_flops((hi + 1 - lo) * d);
    };
    let mut sk = [Vec::new(), Vec::new(), Vec::new()];
    if cfg.difference {
        point_diag(0, &mut sk[1], &mut cost);
        point_diag(1, &mut sk[2], &mut cost);
    }
    let inc = |k: usize, l: usize, sk: &[Vec<f64>; 3]| -> f64 {
        // cell (k, l) with 1 ≤ k ≤ nx, 1 ≤ l ≤ ny
        if cfg.difference {
            // points (k, l) on sk[2], (k-1, l), (k, l-1) on sk[1], (k-1, l-1) on sk[0]
            sk[2][k] - sk[1][k - 1] - sk[1][k] + sk[0][k - 1]
        } else {
            spec.eval_unchecked(x.row(k - 1), y.row(l - 1))
        }
    };

    // Solution antidiagonals over grid indices 0..=nx, indexed by k.
    let mut prev2 = vec![1.0; nx + 1];
    let mut prev1 = vec![1.0; nx + 1];
    let mut cur = vec![1.0; nx + 1];
    cost.observe_floats(3 * (nx + 1) + 3 * lx);
    for s in 2..=nx + ny {
        if cfg.difference {
            sk.rotate_left(1);
            let mut buf = std::mem::take(&mut sk[2]);
            point_diag(s, &mut buf, &mut cost);
            sk[2] = buf;
        }
        let lo = s.saturating_sub(ny).max(1);
        let hi = (s - 1).min(nx);
        if !cfg.difference {
            cost.add_flops((hi + 1 - lo) * d);
        }
        // boundary cells on this antidiagonal
        if s <= nx {
            cur[s] = 1.0;
        }
        if s <= ny {
            cur[0] = 1.0;
        }
        for k in lo..=hi {
            let l = s - k;
            let left = prev1[k]; // (k, l-1)
            let up = prev1[k - 1]; // (k-1, l)
            let diag = prev2[k - 1]; // (k-1, l-1)
            let a = inc(k, l, &sk);
            cur[k] = left + up - diag + 0.5 * a * (left + up);
        }
        cost.add_flops(8 * (hi + 1 - lo));
        std::mem::swap(&mut prev2, &mut prev1);
        std::mem::swap(&mut prev1, &mut cur);
    }
    Ok((prev1[nx], cost))
}
