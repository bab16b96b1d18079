//! Finite-dimensional static feature maps `φ` with `⟨φ(x), φ(y)⟩ ≈ k(x, y)`.
//!
//! * `Rff`: `(1/√D) (cos(Wᵀx), sin(Wᵀx))`, width `2D`, with `W` drawn from the
//!   Gaussian spectral measure of the RBF kernel.
//! * `Rff1d`: `√(2/D) cos(Wᵀx + b)`, width `D`, with `b ~ U[0, 2π)`.
//! * `Nystroem`: `S̃^{-1/2} Ũᵀ k(Z, x)` from `D` landmarks `Z`, keeping the
//!   eigenpairs of `k(Z, Z)` above [`NYSTROEM_EPS`].

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::error::{Error, Result};
use crate::seqcore::SeedStream;
use crate::statickern::{gram, StaticKernelSpec};

pub const NYSTROEM_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StaticFeatureKind {
    Rff,
    Rff1d,
    Nystroem,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StaticFeatureSpec {
    pub kind: StaticFeatureKind,
    pub n_components: usize,
    pub bandwidth: f64,
    pub base_kernel: StaticKernelSpec,
}

impl Default for StaticFeatureSpec {
    fn default() -> Self {
        StaticFeatureSpec {
            kind: StaticFeatureKind::Rff,
            n_components: 100,
            bandwidth: 1.0,
            base_kernel: StaticKernelSpec::default(),
        }
    }
}

impl StaticFeatureSpec {
    pub fn rff(n_components: usize, bandwidth: f64) -> Self {
        StaticFeatureSpec {
            kind: StaticFeatureKind::Rff,
            n_components,
            bandwidth,
            ..Default::default()
        }
    }

    pub fn rff1d(n_components: usize, bandwidth: f64) -> Self {
        StaticFeatureSpec {
            kind: StaticFeatureKind::Rff1d,
            n_components,
            bandwidth,
            ..Default::default()
        }
    }

    pub fn nystroem(n_components: usize, base_kernel: StaticKernelSpec) -> Self {
        StaticFeatureSpec {
            kind: StaticFeatureKind::Nystroem,
            n_components,
            base_kernel,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::invalid("n_components must be at least 1"));
        }
        match self.kind {
            StaticFeatureKind::Rff | StaticFeatureKind::Rff1d => {
                if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
                    return Err(Error::invalid(format!(
                        "bandwidth must be positive, got {}",
                        self.bandwidth
                    )));
                }
                Ok(())
            }
            StaticFeatureKind::Nystroem => self.base_kernel.validate(),
        }
    }
}

/// Fitted randomness of a static feature map. Immutable after fitting.
#[derive(Clone, Debug, PartialEq)]
pub enum StaticFeatureState {
    Rff {
        /// `d × D` frequencies.
        weights: Array2<f64>,
    },
    Rff1d {
        weights: Array2<f64>,
        phases: Array1<f64>,
    },
    Nystroem {
        kernel: StaticKernelSpec,
        /// `D × d` landmark rows.
        landmarks: Array2<f64>,
        /// `D̃ × D` whitening map `S̃^{-1/2} Ũᵀ`.
        whitening: Array2<f64>,
    },
}

/// Samples the randomness for `spec`.
///
/// RFF kinds only read the input dimension from `train`; Nyström draws its
/// landmarks from the rows of `train`.
pub fn fit_static_features(
    spec: &StaticFeatureSpec,
    train: ArrayView2<'_, f64>,
    seed: &SeedStream,
) -> Result<StaticFeatureState> {
    spec.validate()?;
    let d = train.ncols();
    if d == 0 {
        return Err(Error::invalid("input dimension must be at least 1"));
    }
    let n_comp = spec.n_components;
    match spec.kind {
        StaticFeatureKind::Rff => Ok(StaticFeatureState::Rff {
            weights: sample_frequencies(d, n_comp, spec.bandwidth, &seed.child("weights")),
        }),
        StaticFeatureKind::Rff1d => {
            let mut rng = seed.child("phases").rng();
            let phases = Array1::from_shape_fn(n_comp, |_| rng.random_range(0.0..std::f64::consts::TAU));
            Ok(StaticFeatureState::Rff1d {
                weights: sample_frequencies(d, n_comp, spec.bandwidth, &seed.child("weights")),
                phases,
            })
        }
        StaticFeatureKind::Nystroem => {
            if train.nrows() < n_comp {
                return Err(Error::invalid(format!(
                    "Nyström needs at least {n_comp} training vectors, got {}",
                    train.nrows()
                )));
            }
            if train.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("Nyström training data"));
            }
            let mut rng = seed.child("landmarks").rng();
            let mut idx = rand::seq::index::sample(&mut rng, train.nrows(), n_comp).into_vec();
            idx.sort_unstable();
            let landmarks = train.select(ndarray::Axis(0), &idx);
            let whitening = nystroem_whitening(&spec.base_kernel, landmarks.view())?;
            Ok(StaticFeatureState::Nystroem {
                kernel: spec.base_kernel,
                landmarks,
                whitening,
            })
        }
    }
}

fn sample_frequencies(d: usize, n: usize, bandwidth: f64, seed: &SeedStream) -> Array2<f64> {
    let mut rng = seed.rng();
    Array2::from_shape_fn((d, n), |_| rng.sample::<f64, _>(StandardNormal) / bandwidth)
}

fn nystroem_whitening(kernel: &StaticKernelSpec, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let kzz = gram(kernel, z, None)?;
    let n = kzz.nrows();
    let eig = DMatrix::from_fn(n, n, |i, j| kzz[[i, j]]).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > NYSTROEM_EPS).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    if order.is_empty() {
        return Err(Error::Numeric("Nyström landmark Gram has no eigenvalue above EPS".into()));
    }
    Ok(Array2::from_shape_fn((order.len(), n), |(r, c)| {
        let k = order[r];
        eig.eigenvectors[(c, k)] / eig.eigenvalues[k].sqrt()
    }))
}

impl StaticFeatureState {
    pub fn input_dim(&self) -> usize {
        match self {
            StaticFeatureState::Rff { weights } | StaticFeatureState::Rff1d { weights, .. } => weights.nrows(),
            StaticFeatureState::Nystroem { landmarks, .. } => landmarks.ncols(),
        }
    }

    /// Number of random samples `D` (frequencies or landmarks).
    pub fn n_components(&self) -> usize {
        match self {
            StaticFeatureState::Rff { weights } | StaticFeatureState::Rff1d { weights, .. } => weights.ncols(),
            StaticFeatureState::Nystroem { landmarks, .. } => landmarks.nrows(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            StaticFeatureState::Rff { weights } => 2 * weights.ncols(),
            StaticFeatureState::Rff1d { weights, .. } => weights.ncols(),
            StaticFeatureState::Nystroem { whitening, .. } => whitening.nrows(),
        }
    }

    /// Number of stored parameters, for memory accounting.
    pub fn param_count(&self) -> usize {
        match self {
            StaticFeatureState::Rff { weights } => weights.len(),
            StaticFeatureState::Rff1d { weights, phases } => weights.len() + phases.len(),
            StaticFeatureState::Nystroem { landmarks, whitening, .. } => landmarks.len() + whitening.len(),
        }
    }

    /// Writes `φ(x)` into `out` (length [`out_dim`](Self::out_dim)).
    pub fn transform_into(&self, x: ArrayView1<'_, f64>, out: &mut [f64], cost: &mut Cost) {
        debug_assert_eq!(out.len(), self.out_dim());
        match self {
            StaticFeatureState::Rff { weights } => {
                let n = weights.ncols();
                let scale = 1.0 / (n as f64).sqrt();
                for j in 0..n {
                    let proj = x.dot(&weights.column(j));
                    let (s, c) = proj.sin_cos();
                    out[j] = scale * c;
                    out[n + j] = scale * s;
                }
                cost.add_flops(n * x.len() + 2 * n);
            }
            StaticFeatureState::Rff1d { weights, phases } => {
                let n = weights.ncols();
                let scale = (2.0 / n as f64).sqrt();
                for j in 0..n {
                    out[j] = scale * (x.dot(&weights.column(j)) + phases[j]).cos();
                }
                cost.add_flops(n * x.len() + n);
            }
            StaticFeatureState::Nystroem {
                kernel,
                landmarks,
                whitening,
            } => {
                let kz: Vec<f64> = landmarks.rows().into_iter().map(|z| kernel.eval_unchecked(z, x)).collect();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = whitening.row(r).iter().zip(&kz).map(|(a, b)| a * b).sum();
                }
                cost.add_flops(landmarks.len() + whitening.len());
            }
        }
    }

    pub fn transform_one(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        let mut out = vec![0.0; self.out_dim()];
        self.transform_into(x, &mut out, &mut Cost::default());
        Ok(Array1::from(out))
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: d,
            });
        }
        Ok(())
    }
}

/// Applies a fitted feature map to each row of `x`.
pub fn transform_static_features(state: &StaticFeatureState, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    state.check_dim(x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("static feature input"));
    }
    let f = state.out_dim();
    let rows: Vec<Vec<f64>> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let mut out = vec![0.0; f];
            state.transform_into(x.row(i), &mut out, &mut Cost::default());
            out
        })
        .collect();
    Ok(Array2::from_shape_vec((x.nrows(), f), rows.into_iter().flatten().collect()).expect("widths"))
}
