//! Exact signature kernels between pairs of sequences.
//!
//! Three algorithms are provided: a brute-force enumeration over
//! multi-indices (small inputs only, used as the reference), an order-`p`
//! dynamic program and a finite-difference solver for the untruncated
//! kernel's Goursat PDE.

mod bruteforce;
mod dp;
mod pde;

pub use bruteforce::{sig_kernel_bruteforce, sig_kernel_bruteforce_from_static_grams};
pub use dp::{sig_kernel_dp, sig_kernel_dp_from_static_grams, sig_kernel_dp_with_cost};
pub use pde::{sig_pde_kernel, sig_pde_kernel_with_cost};

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::error::{Error, Result};
use crate::seqcore::{check_finite, SequenceBatch};
use crate::statickern::StaticKernelSpec;

/// Maximal number of repetitions of an increment index in a multi-index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "OrderRepr", into = "OrderRepr")]
pub enum Order {
    Finite(usize),
    /// No limit; equivalent to `Finite(M)` at truncation level `M`.
    Infinite,
}

impl Order {
    /// Effective order at truncation level `m` (at least 1).
    pub fn resolve(self, n_levels: usize) -> usize {
        match self {
            Order::Finite(p) => p.min(n_levels).max(1),
            Order::Infinite => n_levels.max(1),
        }
    }
}

impl Default for Order {
    fn default() -> Self {
        Order::Finite(1)
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Order::Finite(p) => write!(f, "{p}"),
            Order::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "∞" => Ok(Order::Infinite),
            t => match t.parse::<usize>() {
                Ok(p) if p >= 1 => Ok(Order::Finite(p)),
                _ => Err(Error::invalid(format!("order must be a positive integer or \"inf\", got {s:?}"))),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum OrderRepr {
    Int(u64),
    Str(String),
}

impl TryFrom<OrderRepr> for Order {
    type Error = Error;

    fn try_from(r: OrderRepr) -> Result<Self> {
        match r {
            OrderRepr::Int(0) => Err(Error::invalid("order must be at least 1")),
            OrderRepr::Int(p) => Ok(Order::Finite(p as usize)),
            OrderRepr::Str(s) => s.parse(),
        }
    }
}

impl From<Order> for OrderRepr {
    fn from(o: Order) -> Self {
        match o {
            Order::Finite(p) => OrderRepr::Int(p as u64),
            Order::Infinite => OrderRepr::Str("inf".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    Levelwise,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    #[serde(rename = "static")]
    pub static_kernel: StaticKernelSpec,
    pub n_levels: usize,
    pub order: Order,
    pub difference: bool,
    pub normalization: Normalization,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            static_kernel: StaticKernelSpec::default(),
            n_levels: 4,
            order: Order::Finite(1),
            difference: true,
            normalization: Normalization::None,
        }
    }
}

impl KernelConfig {
    pub fn new(static_kernel: StaticKernelSpec, n_levels: usize) -> Self {
        KernelConfig {
            static_kernel,
            n_levels,
            ..Default::default()
        }
    }

    pub fn with_order(mut self, order: Order) -> Self {
        self.order = order;
        self
    }

    pub fn with_difference(mut self, difference: bool) -> Self {
        self.difference = difference;
        self
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn effective_order(&self) -> usize {
        self.order.resolve(self.n_levels)
    }

    pub fn validate(&self) -> Result<()> {
        self.static_kernel.validate()
    }
}

/// Per-level kernel values `k_0, …, k_M` with `k_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelValues(pub Vec<f64>);

impl LevelValues {
    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn n_levels(&self) -> usize {
        self.0.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Index<usize> for LevelValues {
    type Output = f64;

    fn index(&self, m: usize) -> &f64 {
        &self.0[m]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Dp,
    Pde,
    Bruteforce,
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Algorithm::Dp),
            "pde" => Ok(Algorithm::Pde),
            "bruteforce" => Ok(Algorithm::Bruteforce),
            _ => Err(Error::invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

/// The matrix the recursions run over: double differences of the static
/// kernel between consecutive points, or the static kernel itself.
pub(crate) fn increment_matrix(gram: ArrayView2<'_, f64>, difference: bool) -> Array2<f64> {
    if !difference {
        return gram.to_owned();
    }
    let (a, b) = gram.dim();
    Array2::from_shape_fn((a.saturating_sub(1), b.saturating_sub(1)), |(i, j)| {
        gram[[i + 1, j + 1]] - gram[[i, j + 1]] - gram[[i + 1, j]] + gram[[i, j]]
    })
}

pub(crate) fn static_gram(spec: &StaticKernelSpec, x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cost: &mut Cost) -> Array2<f64> {
    cost.add_flops(x.nrows() * y.nrows() * x.ncols());
    Array2::from_shape_fn((x.nrows(), y.nrows()), |(i, j)| spec.eval_unchecked(x.row(i), y.row(j)))
}

pub(crate) fn check_pair(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig) -> Result<()> {
    cfg.validate()?;
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: y.ncols(),
        });
    }
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::invalid("sequences must have at least one point"));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")
}

fn eval_pair(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, cfg: &KernelConfig, algorithm: Algorithm) -> Result<(LevelValues, Cost)> {
    match algorithm {
        Algorithm::Dp => sig_kernel_dp_with_cost(x, y, cfg),
        Algorithm::Bruteforce => Ok((sig_kernel_bruteforce(x, y, cfg)?, Cost::default())),
        Algorithm::Pde => {
            let (v, c) = sig_pde_kernel_with_cost(x, y, cfg)?;
            Ok((LevelValues(vec![v]), c))
        }
    }
}

fn combine(v: &LevelValues, dx: &LevelValues, dy: &LevelValues, norm: Normalization) -> Result<f64> {
    match norm {
        Normalization::None => Ok(v.total()),
        Normalization::Global => {
            let (a, b) = (dx.total(), dy.total());
            if a <= 0.0 || b <= 0.0 {
                return Err(Error::Numeric(format!("non-positive self-kernel ({a}, {b}) under global normalization")));
            }
            Ok(v.total() / (a * b).sqrt())
        }
        Normalization::Levelwise => {
            let n = v.0.len();
            let s: f64 = (0..n)
                .map(|m| {
                    let p = dx[m] * dy[m];
                    if p > 0.0 { v[m] / p.sqrt() } else { 0.0 }
                })
                .sum();
            Ok(s / n as f64)
        }
    }
}

/// Pairwise signature-kernel matrix between the sequences of `x` and of
/// `y` (or of `x` itself).
pub fn sig_kernel_gram(x: &SequenceBatch, y: Option<&SequenceBatch>, cfg: &KernelConfig, algorithm: Algorithm) -> Result<Array2<f64>> {
    sig_kernel_gram_with_cost(x, y, cfg, algorithm).map(|(k, _)| k)
}

/// As [`sig_kernel_gram`], also returning the summed solver cost.
pub fn sig_kernel_gram_with_cost(
    x: &SequenceBatch,
    y: Option<&SequenceBatch>,
    cfg: &KernelConfig,
    algorithm: Algorithm,
) -> Result<(Array2<f64>, Cost)> {
    cfg.validate()?;
    if algorithm == Algorithm::Pde && cfg.normalization == Normalization::Levelwise {
        return Err(Error::Incompatible("levelwise normalization needs per-level values; the pde algorithm has none".into()));
    }
    if let Some(y) = y {
        if y.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
    }
    let diag = |b: &SequenceBatch| -> Result<Vec<(LevelValues, Cost)>> {
        (0..b.n())
            .into_par_iter()
            .map(|i| eval_pair(b.sequence(i), b.sequence(i), cfg, algorithm))
            .collect()
    };
    let need_diag = cfg.normalization != Normalization::None;
    let dx = if need_diag { diag(x)? } else { Vec::new() };
    let mut cost: Cost = dx.iter().map(|(_, c)| *c).sum();
    let (n, m) = (x.n(), y.map_or(x.n(), SequenceBatch::n));
    let mut k = Array2::zeros((n, m));
    match y {
        None => {
            let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
            let vals: Vec<(LevelValues, Cost)> = pairs
                .par_iter()
                .map(|&(i, j)| {
                    if i == j && need_diag {
                        Ok((dx[i].0.clone(), Cost::default()))
                    } else {
                        eval_pair(x.sequence(i), x.sequence(j), cfg, algorithm)
                    }
                })
                .collect::<Result<_>>()?;
            for (&(i, j), (v, c)) in pairs.iter().zip(&vals) {
                let val = if need_diag { combine(v, &dx[i].0, &dx[j].0, cfg.normalization)? } else { v.total() };
                k[[i, j]] = val;
                k[[j, i]] = val;
                cost.merge(*c);
            }
        }
        Some(y) => {
            let dy = if need_diag { diag(y)? } else { Vec::new() };
            cost.merge(dy.iter().map(|(_, c)| *c).sum());
            let vals: Vec<(LevelValues, Cost)> = (0..n * m)
                .into_par_iter()
                .map(|p| eval_pair(x.sequence(p / m), y.sequence(p % m), cfg, algorithm))
                .collect::<Result<_>>()?;
            for (p, (v, c)) in vals.iter().enumerate() {
                let (i, j) = (p / m, p % m);
                k[[i, j]] = if need_diag { combine(v, &dx[i].0, &dy[j].0, cfg.normalization)? } else { v.total() };
                cost.merge(*c);
            }
        }
    }
    Ok((k, cost))
}

#[cfg(test)]
mod tests;
