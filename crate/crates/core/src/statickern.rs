//! Static kernels on `R^d` and their Gram matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticKernelKind {
    Linear,
    Polynomial,
    Rbf,
    Matern12,
    Matern32,
    Matern52,
    RationalQuadratic,
}

impl StaticKernelKind {
    /// Stationary kernels satisfy `k(x, x) = 1`.
    pub fn is_stationary(self) -> bool {
        !matches!(self, StaticKernelKind::Linear | StaticKernelKind::Polynomial)
    }
}

/// A static kernel and its hyperparameters.
///
/// Parameters that do not apply to `kind` are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaticKernelSpec {
    pub kind: StaticKernelKind,
    pub scale: f64,
    pub degree: u32,
    pub gamma: f64,
    pub bandwidth: f64,
    pub alpha: f64,
}

impl Default for StaticKernelSpec {
    fn default() -> Self {
        StaticKernelSpec {
            kind: StaticKernelKind::Rbf,
            scale: 1.0,
            degree: 3,
            gamma: 1.0,
            bandwidth: 1.0,
            alpha: 1.0,
        }
    }
}

impl StaticKernelSpec {
    pub fn linear(scale: f64) -> Self {
        StaticKernelSpec {
            kind: StaticKernelKind::Linear,
            scale,
            ..Default::default()
        }
    }

    pub fn polynomial(degree: u32, gamma: f64, scale: f64) -> Self {
        StaticKernelSpec {
            kind: StaticKernelKind::Polynomial,
            degree,
            gamma,
            scale,
            ..Default::default()
        }
    }

    pub fn rbf(bandwidth: f64) -> Self {
        Self::stationary(StaticKernelKind::Rbf, bandwidth)
    }

    pub fn stationary(kind: StaticKernelKind, bandwidth: f64) -> Self {
        StaticKernelSpec {
            kind,
            bandwidth,
            ..Default::default()
        }
    }

    pub fn rational_quadratic(bandwidth: f64, alpha: f64) -> Self {
        StaticKernelSpec {
            kind: StaticKernelKind::RationalQuadratic,
            bandwidth,
            alpha,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        use StaticKernelKind::*;
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self.kind {
            Linear => positive(self.scale, "scale"),
            Polynomial => {
                positive(self.scale, "scale")?;
                if self.degree == 0 {
                    return Err(Error::invalid("degree must be at least 1"));
                }
                if !self.gamma.is_finite() {
                    return Err(Error::invalid("gamma must be finite"));
                }
                Ok(())
            }
            Rbf | Matern12 | Matern32 | Matern52 => positive(self.bandwidth, "bandwidth"),
            RationalQuadratic => {
                positive(self.bandwidth, "bandwidth")?;
                positive(self.alpha, "alpha")
            }
        }
    }

    /// `k(x, y)` without dimension checks. Touches each coordinate once.
    #[inline]
    pub fn eval_unchecked(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        use StaticKernelKind::*;
        match self.kind {
            Linear => self.scale * dot(x, y),
            Polynomial => (self.scale * dot(x, y) + self.gamma).powi(self.degree as i32),
            Rbf => (-sq_dist(x, y) / (2.0 * self.bandwidth * self.bandwidth)).exp(),
            Matern12 => (-(sq_dist(x, y).sqrt() / self.bandwidth)).exp(),
            Matern32 => {
                let r = 3f64.sqrt() * sq_dist(x, y).sqrt() / self.bandwidth;
                (1.0 + r) * (-r).exp()
            }
            Matern52 => {
                let dist = sq_dist(x, y).sqrt() / self.bandwidth;
                let r = 5f64.sqrt() * dist;
                (1.0 + r + 5.0 / 3.0 * dist * dist) * (-r).exp()
            }
            RationalQuadratic => {
                let z = sq_dist(x, y) / (2.0 * self.alpha * self.bandwidth * self.bandwidth);
                (1.0 + z).powf(-self.alpha)
            }
        }
    }
}

#[inline]
fn dot(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

// Each term is squared, so the result is bitwise symmetric in (x, y).
#[inline]
fn sq_dist(x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
    x.iter()
        .zip(y.iter())
        .map(|(a, b)| {
            let d = a - b;
            d * d
        })
        .sum()
}

pub fn kernel_eval(spec: &StaticKernelSpec, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Pairwise kernel matrix between the rows of `x` and the rows of `y`
/// (or of `x` itself when `y` is `None`, in which case the result is
/// exactly symmetric).
pub fn gram(spec: &StaticKernelSpec, x: ArrayView2<'_, f64>, y: Option<ArrayView2<'_, f64>>) -> Result<Array2<f64>> {
    match y {
        Some(y) => {
            if x.ncols() != y.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: x.ncols(),
                    got: y.ncols(),
                });
            }
            let rows: Vec<Vec<f64>> = (0..x.nrows())
                .into_par_iter()
                .map(|i| {
                    (0..y.nrows())
                        .map(|j| spec.eval_unchecked(x.row(i), y.row(j)))
                        .collect()
                })
                .collect();
            Ok(from_rows(rows, x.nrows(), y.nrows()))
        }
        None => {
            let n = x.nrows();
            let rows: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| (i..n).map(|j| spec.eval_unchecked(x.row(i), x.row(j))).collect())
                .collect();
            let mut k = Array2::zeros((n, n));
            for (i, row) in rows.into_iter().enumerate() {
                for (off, v) in row.into_iter().enumerate() {
                    k[[i, i + off]] = v;
                    k[[i + off, i]] = v;
                }
            }
            Ok(k)
        }
    }
}

pub fn gram_diag(spec: &StaticKernelSpec, x: ArrayView2<'_, f64>) -> Array1<f64> {
    x.rows().into_iter().map(|r| spec.eval_unchecked(r, r)).collect()
}

fn from_rows(rows: Vec<Vec<f64>>, n: usize, m: usize) -> Array2<f64> {
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).expect("row lengths")
}

/// Median of pairwise Euclidean distances between the rows of `x`.
///
/// When there are more than `max_pairs` pairs, a fixed-seed uniform sample
/// of `max_pairs` distinct-index pairs is used instead. A zero median
/// falls back to `1.0`.
pub fn median_heuristic(x: ArrayView2<'_, f64>, max_pairs: usize) -> Result<f64> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::invalid("median heuristic needs at least 2 vectors"));
    }
    if max_pairs == 0 {
        return Err(Error::invalid("max_pairs must be positive"));
    }
    let total = n * (n - 1) / 2;
    let dist = |i: usize, j: usize| sq_dist(x.row(i), x.row(j)).sqrt();
    let mut d: Vec<f64> = if total <= max_pairs {
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| dist(i, j))
            .collect()
    } else {
        let mut rng = SeedStream::new(0).child("median_heuristic").rng();
        (0..max_pairs)
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                dist(i, j)
            })
            .collect()
    };
    d.sort_by(|a, b| a.total_cmp(b));
    let k = d.len();
    let med = if k % 2 == 1 {
        d[k / 2]
    } else {
        0.5 * (d[k / 2 - 1] + d[k / 2])
    };
    Ok(if med > 0.0 { med } else { 1.0 })
}

/// Default cap on the number of pairs used by [`median_heuristic`].
pub const MEDIAN_MAX_PAIRS: usize = 1_000_000;
