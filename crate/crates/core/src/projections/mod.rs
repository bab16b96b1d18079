//! Random projections of vectors and of tensor products.
//!
//! Type-1 projections (`Gaussian`, `Subsampling`, `VerySparse`) map a vector
//! `x` to `ψ(x)` with `⟨ψ(x), ψ(y)⟩ ≈ ⟨x, y⟩`. A state is fitted either for
//! single vectors or for Kronecker products `x ⊠ y`, never both.
//!
//! Type-2 projections (`TensorSketch`, `Trp`, `Diagonal`) project a tensor
//! product `x₁ ⊗ ⋯ ⊗ x_m` without forming it:
//!
//! ```text
//! P(x₁ ⊗ ⋯ ⊗ x_m) = ψ̂_m(⋯ ψ̂_2(ψ_1(x₁), x₂) ⋯, x_m)
//! ```
//!
//! where slot `j` carries its own independent randomness.

mod fft;

pub use fft::{circular_convolve, circular_convolve_direct, circular_convolve_fft, fft_in_place};

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::error::{Error, Result};
use crate::seqcore::SeedStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionKind {
    Gaussian,
    Subsampling,
    Verysparse,
    TensorSketch,
    Trp,
    Diagonal,
}

impl ProjectionKind {
    pub fn is_structured(self) -> bool {
        matches!(self, ProjectionKind::TensorSketch | ProjectionKind::Trp | ProjectionKind::Diagonal)
    }
}

/// Row density of the very sparse projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sparsity {
    /// `s(d) = 1/√d`
    #[default]
    Sqrt,
    /// `s(d) = ln d / d`
    Log,
}

impl Sparsity {
    pub fn density(self, d: usize) -> f64 {
        let d = d as f64;
        let s = match self {
            Sparsity::Sqrt => 1.0 / d.sqrt(),
            Sparsity::Log => d.ln() / d,
        };
        // d = 1 under "log" gives 0
        if s > 0.0 { s.min(1.0) } else { 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjectionSpec {
    pub kind: ProjectionKind,
    pub n_components: usize,
    pub sparsity: Sparsity,
    pub internal_size: usize,
    pub n_slots: usize,
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec {
            kind: ProjectionKind::Gaussian,
            n_components: 100,
            sparsity: Sparsity::Sqrt,
            internal_size: 2,
            n_slots: 1,
        }
    }
}

impl ProjectionSpec {
    pub fn new(kind: ProjectionKind, n_components: usize) -> Self {
        ProjectionSpec {
            kind,
            n_components,
            ..Default::default()
        }
    }

    pub fn with_slots(mut self, n_slots: usize) -> Self {
        self.n_slots = n_slots;
        self
    }

    pub fn with_internal_size(mut self, q: usize) -> Self {
        self.internal_size = q;
        self
    }

    pub fn with_sparsity(mut self, s: Sparsity) -> Self {
        self.sparsity = s;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.kind != ProjectionKind::Diagonal && self.n_components == 0 {
            return Err(Error::invalid("n_components must be at least 1"));
        }
        if self.kind == ProjectionKind::Diagonal && !(1..=2).contains(&self.internal_size) {
            return Err(Error::invalid(format!(
                "diagonal projection needs internal_size 1 or 2, got {}",
                self.internal_size
            )));
        }
        if matches!(self.kind, ProjectionKind::TensorSketch | ProjectionKind::Trp) && self.n_slots == 0 {
            return Err(Error::invalid("structured projections need at least one slot"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitMode {
    Vector,
    /// Fitted for `x ⊠ y` with `x ∈ R^left`, `y ∈ R^right`.
    Outer { left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Inner {
    Gaussian { z: Array2<f64> },
    Subsampling { idx: Vec<usize> },
    /// Nonzero rows of the sparse sign matrix with their dense `Q`-rows.
    VerySparse { rows: Vec<(usize, Vec<f64>)>, density: f64 },
    TensorSketch { hashes: Vec<Vec<usize>>, signs: Vec<Vec<f64>> },
    Trp { z: Vec<Array2<f64>> },
    Diagonal,
}

/// A fitted projection. Immutable after fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionState {
    kind: ProjectionKind,
    n_components: usize,
    internal_size: usize,
    input_dim: usize,
    mode: FitMode,
    allow_fft: bool,
    inner: Inner,
}

/// Fits a projection for single vectors of dimension `d`.
///
/// For structured kinds this also enables [`ProjectionState::project_outer`];
/// for the diagonal kind `d` counts blocks of width `internal_size`.
pub fn fit_projection(spec: &ProjectionSpec, d: usize, seed: &SeedStream) -> Result<ProjectionState> {
    spec.validate()?;
    if d == 0 {
        return Err(Error::invalid("input dimension must be at least 1"));
    }
    fit_impl(spec, d, FitMode::Vector, seed)
}

/// Fits a Type-1 projection for Kronecker products of a `left`- and a
/// `right`-dimensional vector. The randomness is sampled over the full
/// product dimension `left · right`.
pub fn fit_projection_outer(spec: &ProjectionSpec, left: usize, right: usize, seed: &SeedStream) -> Result<ProjectionState> {
    spec.validate()?;
    if spec.kind.is_structured() {
        return Err(Error::invalid("structured projections are fitted with fit_projection"));
    }
    if left == 0 || right == 0 {
        return Err(Error::invalid("input dimensions must be at least 1"));
    }
    fit_impl(spec, left * right, FitMode::Outer { left, right }, seed)
}

fn fit_impl(spec: &ProjectionSpec, d: usize, mode: FitMode, seed: &SeedStream) -> Result<ProjectionState> {
    let q = spec.n_components;
    let inner = match spec.kind {
        ProjectionKind::Gaussian => Inner::Gaussian {
            z: gaussian_matrix(d, q, &seed.child("gaussian")),
        },
        ProjectionKind::Subsampling => {
            if q > d {
                return Err(Error::invalid(format!("subsampling {q} of {d} coordinates")));
            }
            let mut rng = seed.child("subsampling").rng();
            Inner::Subsampling {
                idx: rand::seq::index::sample(&mut rng, d, q).into_vec(),
            }
        }
        ProjectionKind::Verysparse => {
            let density = spec.sparsity.density(d);
            let mut rng = seed.child("verysparse").rng();
            let mut rows = Vec::new();
            for i in 0..d {
                let row: Vec<f64> = (0..q)
                    .map(|_| {
                        let keep = rng.random_bool(density);
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        if keep { sign } else { 0.0 }
                    })
                    .collect();
                if row.iter().any(|&v| v != 0.0) {
                    rows.push((i, row));
                }
            }
            Inner::VerySparse { rows, density }
        }
        ProjectionKind::TensorSketch => {
            let mut hashes = Vec::with_capacity(spec.n_slots);
            let mut signs = Vec::with_capacity(spec.n_slots);
            for j in 0..spec.n_slots {
                let mut rng = seed.child("tensor_sketch").index(j).rng();
                hashes.push((0..d).map(|_| rng.random_range(0..q)).collect());
                signs.push((0..d).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect());
            }
            Inner::TensorSketch { hashes, signs }
        }
        ProjectionKind::Trp => Inner::Trp {
            z: (0..spec.n_slots)
                .map(|j| gaussian_matrix(d, q, &seed.child("trp").index(j)))
                .collect(),
        },
        ProjectionKind::Diagonal => Inner::Diagonal,
    };
    let n_components = if spec.kind == ProjectionKind::Diagonal { d * spec.internal_size } else { q };
    Ok(ProjectionState {
        kind: spec.kind,
        n_components,
        internal_size: spec.internal_size,
        input_dim: d,
        mode,
        allow_fft: true,
        inner,
    })
}

fn gaussian_matrix(d: usize, q: usize, seed: &SeedStream) -> Array2<f64> {
    let mut rng = seed.rng();
    Array2::from_shape_fn((d, q), |_| rng.sample(StandardNormal))
}

impl ProjectionState {
    /// A tensorized random projection with the given per-slot `d × Q`
    /// matrices.
    pub fn trp_from_matrices(z: Vec<Array2<f64>>) -> Result<Self> {
        let first = z.first().ok_or_else(|| Error::invalid("need at least one slot"))?;
        let (d, q) = first.dim();
        if z.iter().any(|m| m.dim() != (d, q)) {
            return Err(Error::invalid("slot matrices must share a shape"));
        }
        Ok(ProjectionState {
            kind: ProjectionKind::Trp,
            n_components: q,
            internal_size: 1,
            input_dim: d,
            mode: FitMode::Vector,
            allow_fft: true,
            inner: Inner::Trp { z },
        })
    }

    /// A tensor sketch with explicit per-slot hash (`h_j(i) ∈ 0..Q`) and
    /// sign tables.
    pub fn tensor_sketch_from_tables(n_components: usize, hashes: Vec<Vec<usize>>, signs: Vec<Vec<f64>>) -> Result<Self> {
        let d = hashes.first().map(|h| h.len()).ok_or_else(|| Error::invalid("need at least one slot"))?;
        let ok = hashes.len() == signs.len()
            && hashes.iter().all(|h| h.len() == d && h.iter().all(|&b| b < n_components))
            && signs.iter().all(|s| s.len() == d && s.iter().all(|&v| v == 1.0 || v == -1.0));
        if !ok {
            return Err(Error::invalid("malformed hash or sign tables"));
        }
        Ok(ProjectionState {
            kind: ProjectionKind::TensorSketch,
            n_components,
            internal_size: 1,
            input_dim: d,
            mode: FitMode::Vector,
            allow_fft: true,
            inner: Inner::TensorSketch { hashes, signs },
        })
    }

    /// Forces tensor-sketch convolutions through the direct double sum.
    pub fn with_direct_convolution(mut self) -> Self {
        self.allow_fft = false;
        self
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    /// Output width: `Q`, or `d · q` for the diagonal projection.
    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn mode(&self) -> FitMode {
        self.mode
    }

    pub fn n_slots(&self) -> usize {
        match &self.inner {
            Inner::TensorSketch { hashes, .. } => hashes.len(),
            Inner::Trp { z } => z.len(),
            Inner::Diagonal => usize::MAX,
            _ => 1,
        }
    }

    pub fn param_count(&self) -> usize {
        match &self.inner {
            Inner::Gaussian { z } => z.len(),
            Inner::Subsampling { idx } => idx.len(),
            Inner::VerySparse { rows, .. } => rows.iter().map(|(_, r)| r.len() + 1).sum(),
            Inner::TensorSketch { hashes, signs } => hashes.iter().map(Vec::len).sum::<usize>() + signs.iter().map(Vec::len).sum::<usize>(),
            Inner::Trp { z } => z.iter().map(|m| m.len()).sum(),
            Inner::Diagonal => 0,
        }
    }

    /// Number of coordinates of the product a Type-1 outer projection reads.
    pub fn touched_coordinates(&self) -> usize {
        match &self.inner {
            Inner::Subsampling { idx } => idx.len(),
            Inner::VerySparse { rows, .. } => rows.len(),
            _ => self.input_dim,
        }
    }

    fn raw_dim(&self) -> usize {
        match self.kind {
            ProjectionKind::Diagonal => self.input_dim * self.internal_size,
            _ => self.input_dim,
        }
    }

    fn check_len(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    /// `ψ(x)`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let FitMode::Outer { .. } = self.mode {
            return Err(Error::ProjectionMode {
                fitted: "outer-product",
                requested: "vector",
            });
        }
        self.check_len(x.len(), self.raw_dim())?;
        let q = self.n_components;
        let mut cost = Cost::default();
        Ok(match &self.inner {
            Inner::Gaussian { .. } | Inner::Subsampling { .. } | Inner::VerySparse { .. } => {
                self.type1_apply(|i| x[i], &mut cost)
            }
            Inner::TensorSketch { .. } => self.lift(0, x, &mut cost),
            Inner::Trp { .. } => {
                let s = 1.0 / (q as f64).sqrt();
                self.lift(0, x, &mut cost).into_iter().map(|v| v * s).collect()
            }
            Inner::Diagonal => x.to_vec(),
        })
    }

    /// `ψ̂(u, v)`, composing into slot 1.
    ///
    /// Type-1 (fitted with [`fit_projection_outer`]): `ψ(u ⊠ v)` with both
    /// arguments raw. Structured kinds: `u` is already projected and `v` is
    /// raw.
    pub fn project_outer(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.project_outer_at(1, u, v)
    }

    /// `ψ̂_{slot+1}(u, v)` for structured kinds; `slot` is ignored by Type-1.
    pub fn project_outer_at(&self, slot: usize, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let mut cost = Cost::default();
        match (&self.inner, self.mode) {
            (Inner::Gaussian { .. } | Inner::Subsampling { .. } | Inner::VerySparse { .. }, FitMode::Vector) => {
                Err(Error::ProjectionMode {
                    fitted: "vector",
                    requested: "outer-product",
                })
            }
            (_, FitMode::Outer { left, right }) => {
                self.check_len(u.len(), left)?;
                self.check_len(v.len(), right)?;
                // only the coordinates the projection reads are formed
                Ok(self.type1_apply(|k| u[k / right] * v[k % right], &mut cost))
            }
            (Inner::Diagonal, _) => {
                let d = self.input_dim;
                if u.len() % d != 0 {
                    return Err(Error::DimensionMismatch {
                        expected: d * (u.len() / d).max(1),
                        got: u.len(),
                    });
                }
                self.check_len(v.len(), self.raw_dim())?;
                let lifted = v.to_vec();
                Ok(self.combine(u, &lifted, &mut cost))
            }
            _ => {
                if slot >= self.n_slots() {
                    return Err(Error::SlotExhausted {
                        requested: slot,
                        available: self.n_slots(),
                    });
                }
                self.check_len(u.len(), self.n_components)?;
                self.check_len(v.len(), self.input_dim)?;
                let lifted = self.lift(slot, v, &mut cost);
                Ok(self.combine(u, &lifted, &mut cost))
            }
        }
    }

    /// `P(x₁ ⊗ ⋯ ⊗ x_m)` for structured kinds.
    pub fn project_tensor(&self, factors: &[&[f64]]) -> Result<Vec<f64>> {
        let (first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::invalid("need at least one factor"))?;
        if !self.kind.is_structured() {
            return Err(Error::ProjectionMode {
                fitted: "type-1",
                requested: "structured tensor",
            });
        }
        if factors.len() > self.n_slots() {
            return Err(Error::SlotExhausted {
                requested: factors.len() - 1,
                available: self.n_slots(),
            });
        }
        let mut acc = self.project(first)?;
        for (j, x) in rest.iter().enumerate() {
            acc = self.project_outer_at(j + 1, &acc, x)?;
        }
        Ok(acc)
    }

    fn type1_apply(&self, coord: impl Fn(usize) -> f64, cost: &mut Cost) -> Vec<f64> {
        let q = self.n_components;
        let d = self.input_dim;
        match &self.inner {
            Inner::Gaussian { z } => {
                let s = 1.0 / (q as f64).sqrt();
                let mut out = vec![0.0; q];
                for i in 0..d {
                    let xi = coord(i);
                    for (o, zij) in out.iter_mut().zip(z.row(i)) {
                        *o += zij * xi;
                    }
                }
                cost.add_flops(d * q);
                out.into_iter().map(|v| v * s).collect()
            }
            Inner::Subsampling { idx } => {
                let s = (d as f64 / q as f64).sqrt();
                cost.add_flops(q);
                idx.iter().map(|&i| s * coord(i)).collect()
            }
            Inner::VerySparse { rows, density } => {
                let s = (1.0 / (density * q as f64)).sqrt();
                let mut out = vec![0.0; q];
                for (i, row) in rows {
                    let xi = coord(*i);
                    for (o, zij) in out.iter_mut().zip(row) {
                        *o += zij * xi;
                    }
                }
                cost.add_flops(rows.len() * q);
                out.into_iter().map(|v| v * s).collect()
            }
            _ => unreachable!("type-1 only"),
        }
    }

    /// Structured kinds: the neutral element `e` with `combine(e, lift(0, x))
    /// = ψ(x)`.
    pub(crate) fn unit(&self) -> Vec<f64> {
        let q = self.n_components;
        match &self.inner {
            Inner::Trp { .. } => vec![1.0 / (q as f64).sqrt(); q],
            Inner::TensorSketch { .. } => {
                let mut e = vec![0.0; q];
                e[0] = 1.0;
                e
            }
            Inner::Diagonal => vec![1.0 / (self.input_dim as f64).sqrt(); self.input_dim],
            _ => unreachable!("structured only"),
        }
    }

    /// Structured kinds: the slot-specific linear map applied to a raw factor.
    pub(crate) fn lift(&self, slot: usize, v: &[f64], cost: &mut Cost) -> Vec<f64> {
        let q = self.n_components;
        match &self.inner {
            Inner::Trp { z } => {
                let z = &z[slot];
                let mut out = vec![0.0; q];
                for (i, &vi) in v.iter().enumerate() {
                    for (o, zij) in out.iter_mut().zip(z.row(i)) {
                        *o += zij * vi;
                    }
                }
                cost.add_flops(v.len() * q);
                out
            }
            Inner::TensorSketch { hashes, signs } => {
                let mut out = vec![0.0; q];
                for ((&h, &s), &vi) in hashes[slot].iter().zip(&signs[slot]).zip(v) {
                    out[h] += s * vi;
                }
                cost.add_flops(v.len());
                out
            }
            Inner::Diagonal => v.to_vec(),
            _ => unreachable!("structured only"),
        }
    }

    /// Structured kinds: merges a projected tensor with a lifted factor.
    pub(crate) fn combine(&self, u: &[f64], lifted: &[f64], cost: &mut Cost) -> Vec<f64> {
        match &self.inner {
            Inner::Trp { .. } => {
                cost.add_flops(u.len());
                u.iter().zip(lifted).map(|(a, b)| a * b).collect()
            }
            Inner::TensorSketch { .. } => {
                let mut out = vec![0.0; u.len()];
                fft::convolve_into(u, lifted, &mut out, self.allow_fft, cost);
                out
            }
            Inner::Diagonal => {
                let d = self.input_dim;
                let (wu, wv) = (u.len() / d, lifted.len() / d);
                let s = (d as f64).sqrt();
                let mut out = Vec::with_capacity(d * wu * wv);
                for i in 0..d {
                    let ub = &u[i * wu..(i + 1) * wu];
                    let vb = &lifted[i * wv..(i + 1) * wv];
                    for &a in ub {
                        for &b in vb {
                            out.push(s * a * b);
                        }
                    }
                }
                cost.add_flops(2 * out.len());
                out
            }
            _ => unreachable!("structured only"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron(x: &[f64], y: &[f64]) -> Vec<f64> {
        x.iter().flat_map(|a| y.iter().map(move |b| a * b)).collect()
    }

    fn randvec(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = SeedStream::new(seed).child("v").rng();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn gaussian_shape() {
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::Gaussian, 5), 3, &SeedStream::new(0)).unwrap();
        match &st.inner {
            Inner::Gaussian { z } => assert_eq!(z.dim(), (3, 5)),
            _ => unreachable!(),
        }
        assert_eq!(st.project(&[1.0, 2.0, 3.0]).unwrap().len(), 5);
    }

    #[test]
    fn tensor_sketch_tables() {
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::TensorSketch, 8).with_slots(3), 4, &SeedStream::new(0)).unwrap();
        match &st.inner {
            Inner::TensorSketch { hashes, signs } => {
                assert_eq!(hashes.len(), 3);
                assert!(hashes.iter().flatten().all(|&h| h < 8));
                assert!(signs.iter().flatten().all(|&s| s == 1.0 || s == -1.0));
                assert_ne!(hashes[0], hashes[1]);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn fit_is_deterministic() {
        for kind in [ProjectionKind::Gaussian, ProjectionKind::Verysparse, ProjectionKind::TensorSketch, ProjectionKind::Trp] {
            let spec = ProjectionSpec::new(kind, 6).with_slots(2);
            let a = fit_projection(&spec, 4, &SeedStream::new(3)).unwrap();
            let b = fit_projection(&spec, 4, &SeedStream::new(3)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn count_sketch_hand_value() {
        // h = (1, 1) in one-based buckets, i.e. bucket 0; s = (+1, -1)
        let st = ProjectionState::tensor_sketch_from_tables(2, vec![vec![0, 0]], vec![vec![1.0, -1.0]]).unwrap();
        assert_eq!(st.project(&[3.0, 4.0]).unwrap(), vec![-1.0, 0.0]);
    }

    #[test]
    fn subsampling_full_is_permutation() {
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::Subsampling, 4), 4, &SeedStream::new(1)).unwrap();
        let mut p = st.project(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        p.sort_by(f64::total_cmp);
        assert_eq!(p, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn subsampling_too_many() {
        let r = fit_projection(&ProjectionSpec::new(ProjectionKind::Subsampling, 5), 4, &SeedStream::new(1));
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn gaussian_preserves_inner_products() {
        let x = randvec(1, 10);
        let y = randvec(2, 10);
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::Gaussian, 4096), 10, &SeedStream::new(5)).unwrap();
        let approx = dot(&st.project(&x).unwrap(), &st.project(&y).unwrap());
        let exact = dot(&x, &y);
        let rel = (approx - exact).abs() / (dot(&x, &x) * dot(&y, &y)).sqrt();
        assert!(rel < 0.1, "{rel}");
    }

    #[test]
    fn trp_hand_value() {
        let ones = Array2::from_elem((2, 1), 1.0);
        let st = ProjectionState::trp_from_matrices(vec![ones.clone(), ones]).unwrap();
        let px = st.project(&[1.0, 2.0]).unwrap();
        assert_eq!(px, vec![3.0]);
        assert_eq!(st.project_outer(&px, &[3.0, 4.0]).unwrap(), vec![21.0]);
    }

    #[test]
    fn diagonal_single_block() {
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::Diagonal, 0).with_internal_size(2), 1, &SeedStream::new(0)).unwrap();
        assert_eq!(st.project(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        assert_eq!(st.project_outer(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), kron(&[1.0, 2.0], &[3.0, 4.0]));
    }

    #[test]
    fn diagonal_bad_internal_size() {
        let r = fit_projection(&ProjectionSpec::new(ProjectionKind::Diagonal, 0).with_internal_size(3), 2, &SeedStream::new(0));
        assert!(r.is_err());
    }

    #[test]
    fn slot_exhaustion() {
        let st = fit_projection(&ProjectionSpec::new(ProjectionKind::Trp, 4).with_slots(2), 3, &SeedStream::new(0)).unwrap();
        let x = [1.0, 0.0, 0.0];
        assert!(st.project_tensor(&[&x, &x]).is_ok());
        assert!(matches!(st.project_tensor(&[&x, &x, &x]), Err(Error::SlotExhausted { .. })));
        let u = st.project(&x).unwrap();
        assert!(matches!(st.project_outer_at(2, &u, &x), Err(Error::SlotExhausted { .. })));
    }

    #[test]
    fn type1_modes_are_exclusive() {
        let spec = ProjectionSpec::new(ProjectionKind::Gaussian, 3);
        let vec_mode = fit_projection(&spec, 4, &SeedStream::new(0)).unwrap();
        assert!(matches!(vec_mode.project_outer(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::ProjectionMode { .. })));
        let outer = fit_projection_outer(&spec, 2, 2, &SeedStream::new(0)).unwrap();
        assert!(matches!(outer.project(&[1.0; 4]), Err(Error::ProjectionMode { .. })));
    }

    #[test]
    fn type1_outer_matches_materialized_kronecker() {
        for kind in [ProjectionKind::Gaussian, ProjectionKind::Subsampling, ProjectionKind::Verysparse] {
            for (dx, dy) in [(1, 1), (2, 3), (6, 6), (4, 5)] {
                let q = (dx * dy).min(7);
                let spec = ProjectionSpec::new(kind, q).with_sparsity(Sparsity::Log);
                let outer = fit_projection_outer(&spec, dx, dy, &SeedStream::new(9)).unwrap();
                let flat = fit_projection(&spec, dx * dy, &SeedStream::new(9)).unwrap();
                let x = randvec(dx as u64, dx);
                let y = randvec(100 + dy as u64, dy);
                let a = outer.project_outer(&x, &y).unwrap();
                let b = flat.project(&kron(&x, &y)).unwrap();
                assert_eq!(
                    a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    b.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    "{kind:?} {dx}x{dy}"
                );
            }
        }
    }

    #[test]
    fn sparse_outer_touches_only_selected_coordinates() {
        let spec = ProjectionSpec::new(ProjectionKind::Subsampling, 5);
        let st = fit_projection_outer(&spec, 30, 30, &SeedStream::new(2)).unwrap();
        assert_eq!(st.touched_coordinates(), 5);
        let spec = ProjectionSpec::new(ProjectionKind::Verysparse, 3).with_sparsity(Sparsity::Sqrt);
        let st = fit_projection_outer(&spec, 30, 30, &SeedStream::new(2)).unwrap();
        // density 1/30 with 3 columns: about 90 of 900 product coordinates
        assert!(st.touched_coordinates() < 200, "{}", st.touched_coordinates());
    }

    #[test]
    fn sketch_direct_and_fft_agree() {
        let spec = ProjectionSpec::new(ProjectionKind::TensorSketch, 64).with_slots(3);
        let st = fit_projection(&spec, 10, &SeedStream::new(4)).unwrap();
        let direct = st.clone().with_direct_convolution();
        let xs: Vec<Vec<f64>> = (0..3).map(|i| randvec(i, 10)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let a = st.project_tensor(&refs).unwrap();
        let b = direct.project_tensor(&refs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    fn check_structured_unbiased(kind: ProjectionKind, m: usize) {
        let dim = 3;
        let xs: Vec<Vec<f64>> = (0..m).map(|i| randvec(10 + i as u64, dim)).collect();
        let ys: Vec<Vec<f64>> = (0..m).map(|i| randvec(20 + i as u64, dim)).collect();
        let target: f64 = xs.iter().zip(&ys).map(|(x, y)| dot(x, y)).product();
        let xr: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let yr: Vec<&[f64]> = ys.iter().map(Vec::as_slice).collect();
        let spec = ProjectionSpec::new(kind, 4).with_slots(m);
        let samples: Vec<f64> = (0..10_000)
            .map(|s| {
                let st = fit_projection(&spec, dim, &SeedStream::new(s)).unwrap();
                dot(&st.project_tensor(&xr).unwrap(), &st.project_tensor(&yr).unwrap())
            })
            .collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let se = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{kind:?} m={m}: {mean} vs {target} (se {se})");
    }

    #[test]
    fn structured_projections_unbiased() {
        for m in 1..=3 {
            check_structured_unbiased(ProjectionKind::TensorSketch, m);
            check_structured_unbiased(ProjectionKind::Trp, m);
        }
    }
}
