//! Random-feature maps whose inner products approximate truncated signature
//! kernels.
//!
//! Every variant runs the same recursion over the increments `∇φ(x_t)` of a
//! static feature map. After each step, level `m` gains
//!
//! ```text
//! Σ_{q=1..p} (1/q!) · P_{m-q} ∘ L_{m-q+1}(v) ∘ ⋯ ∘ L_m(v)
//! ```
//!
//! where `P_j` is the level-`j` feature of the prefix up to the previous
//! step and `P_0` is a fixed unit element. The variants differ in the lift
//! `L_a` applied to the position-`a` increment and in the product `∘`:
//!
//! | variant     | lift                 | product                    | level width |
//! |-------------|----------------------|----------------------------|-------------|
//! | `rfsf_full` | identity             | Kronecker                  | `(2D)^m`    |
//! | `trp`       | Gaussian projection  | elementwise                | `Q`         |
//! | `ts`        | count sketch         | circular convolution       | `Q`         |
//! | `dp`        | identity             | blockwise Kronecker        | `2^m D`     |
//! | `dp1d`      | identity             | elementwise                | `D`         |

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::Cost;
use crate::dualsig::Order;
use crate::error::{Error, Result};
use crate::projections::{fit_projection, ProjectionKind, ProjectionSpec, ProjectionState};
use crate::seqcore::{SeedStream, SequenceBatch};
use crate::staticfeat::{fit_static_features, StaticFeatureKind, StaticFeatureSpec, StaticFeatureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigVariant {
    RfsfFull,
    Dp,
    Dp1d,
    Trp,
    Ts,
}

impl SigVariant {
    pub const ALL: [SigVariant; 5] = [SigVariant::RfsfFull, SigVariant::Dp, SigVariant::Dp1d, SigVariant::Trp, SigVariant::Ts];

    pub fn name(self) -> &'static str {
        match self {
            SigVariant::RfsfFull => "rfsf_full",
            SigVariant::Dp => "dp",
            SigVariant::Dp1d => "dp1d",
            SigVariant::Trp => "trp",
            SigVariant::Ts => "ts",
        }
    }

    /// The static feature kind the variant uses by default.
    pub fn default_static(self) -> StaticFeatureKind {
        match self {
            SigVariant::Dp1d => StaticFeatureKind::Rff1d,
            _ => StaticFeatureKind::Rff,
        }
    }
}

impl std::str::FromStr for SigVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SigVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown feature variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SigFeatureConfig {
    pub variant: SigVariant,
    /// Static feature map; its `n_components` is replaced by the field below.
    #[serde(rename = "static")]
    pub static_features: StaticFeatureSpec,
    /// Number of static random samples `D`.
    pub n_components: usize,
    /// Projection width `Q` (`trp`, `ts`).
    pub projection_size: usize,
    pub n_levels: usize,
    pub order: Order,
    pub difference: bool,
    pub normalize: bool,
}

impl Default for SigFeatureConfig {
    fn default() -> Self {
        SigFeatureConfig {
            variant: SigVariant::Trp,
            static_features: StaticFeatureSpec::default(),
            n_components: 100,
            projection_size: 100,
            n_levels: 4,
            order: Order::Finite(1),
            difference: true,
            normalize: false,
        }
    }
}

impl SigFeatureConfig {
    /// A configuration with RFF static features of the variant's default kind.
    pub fn new(variant: SigVariant, n_components: usize, n_levels: usize, bandwidth: f64) -> Self {
        let static_features = match variant.default_static() {
            StaticFeatureKind::Rff1d => StaticFeatureSpec::rff1d(n_components, bandwidth),
            _ => StaticFeatureSpec::rff(n_components, bandwidth),
        };
        SigFeatureConfig {
            variant,
            static_features,
            n_components,
            projection_size: n_components,
            n_levels,
            ..Default::default()
        }
    }

    pub fn with_projection_size(mut self, q: usize) -> Self {
        self.projection_size = q;
        self
    }

    pub fn with_order(mut self, order: Order) -> Self {
        self.order = order;
        self
    }

    pub fn with_difference(mut self, difference: bool) -> Self {
        self.difference = difference;
        self
    }

    pub fn with_normalize(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    fn static_spec(&self) -> StaticFeatureSpec {
        StaticFeatureSpec {
            n_components: self.n_components,
            ..self.static_features
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_components == 0 {
            return Err(Error::invalid("n_components must be at least 1"));
        }
        if matches!(self.variant, SigVariant::Trp | SigVariant::Ts) && self.projection_size == 0 {
            return Err(Error::invalid("projection_size must be at least 1"));
        }
        self.static_spec().validate()?;
        let kind = self.static_features.kind;
        let ok = match self.variant {
            SigVariant::RfsfFull => true,
            SigVariant::Dp => kind == StaticFeatureKind::Rff,
            SigVariant::Dp1d => kind == StaticFeatureKind::Rff1d,
            SigVariant::Trp | SigVariant::Ts => kind != StaticFeatureKind::Nystroem,
        };
        if !ok {
            return Err(Error::Incompatible(format!(
                "variant {} cannot use {:?} static features",
                self.variant.name(),
                kind
            )));
        }
        Ok(())
    }

    /// Width of level `m` (`m ≥ 1`) for `D = n_components`, given the static
    /// feature width.
    fn level_width(&self, m: usize, static_width: usize) -> usize {
        match self.variant {
            SigVariant::RfsfFull => static_width.pow(m as u32),
            SigVariant::Trp | SigVariant::Ts => self.projection_size,
            SigVariant::Dp => (1usize << m) * self.n_components,
            SigVariant::Dp1d => self.n_components,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Algebra {
    Kronecker,
    Projected(ProjectionState),
}

/// Fitted signature feature map. Immutable after fitting.
#[derive(Clone, Debug, PartialEq)]
pub struct SigFeatureState {
    config: SigFeatureConfig,
    input_dim: usize,
    /// One independent static map per level position.
    statics: Vec<StaticFeatureState>,
    algebra: Algebra,
    widths: Vec<usize>,
}

/// Samples independent static maps (and projection slots) for every level
/// position.
pub fn fit_sig_features(cfg: &SigFeatureConfig, train: &SequenceBatch, seed: &SeedStream) -> Result<SigFeatureState> {
    cfg.validate()?;
    let spec = cfg.static_spec();
    let pooled = train.pooled_steps();
    let statics: Vec<StaticFeatureState> = (0..cfg.n_levels)
        .map(|a| fit_static_features(&spec, pooled.view(), &seed.child("static").index(a)))
        .collect::<Result<_>>()?;
    let static_width = statics.first().map_or(match spec.kind {
        StaticFeatureKind::Rff => 2 * cfg.n_components,
        _ => cfg.n_components,
    }, StaticFeatureState::out_dim);
    let proj_seed = seed.child("projection");
    let algebra = match cfg.variant {
        SigVariant::RfsfFull => Algebra::Kronecker,
        SigVariant::Trp | SigVariant::Ts => {
            let kind = if cfg.variant == SigVariant::Trp { ProjectionKind::Trp } else { ProjectionKind::TensorSketch };
            let pspec = ProjectionSpec::new(kind, cfg.projection_size).with_slots(cfg.n_levels.max(1));
            Algebra::Projected(fit_projection(&pspec, static_width, &proj_seed)?)
        }
        SigVariant::Dp | SigVariant::Dp1d => {
            let q = if cfg.variant == SigVariant::Dp { 2 } else { 1 };
            let pspec = ProjectionSpec::new(ProjectionKind::Diagonal, 0).with_internal_size(q);
            Algebra::Projected(fit_projection(&pspec, cfg.n_components, &proj_seed)?)
        }
    };
    let widths = std::iter::once(1)
        .chain((1..=cfg.n_levels).map(|m| cfg.level_width(m, static_width)))
        .collect();
    Ok(SigFeatureState {
        config: *cfg,
        input_dim: train.dim(),
        statics,
        algebra,
        widths,
    })
}

impl SigFeatureState {
    pub fn config(&self) -> &SigFeatureConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Widths `F_0 = 1, F_1, …, F_M`.
    pub fn level_widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn total_width(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Forces tensor-sketch products through direct convolution.
    pub fn with_direct_convolution(mut self) -> Self {
        if let Algebra::Projected(p) = self.algebra {
            self.algebra = Algebra::Projected(p.with_direct_convolution());
        }
        self
    }

    /// Static map of level position `a` (zero-based).
    pub fn static_state(&self, a: usize) -> &StaticFeatureState {
        &self.statics[a]
    }

    fn unit(&self) -> Vec<f64> {
        match &self.algebra {
            Algebra::Kronecker => vec![1.0],
            Algebra::Projected(p) => p.unit(),
        }
    }

    fn lift(&self, a: usize, phi: &[f64], cost: &mut Cost) -> Vec<f64> {
        match &self.algebra {
            Algebra::Kronecker => phi.to_vec(),
            Algebra::Projected(p) => match self.config.variant {
                SigVariant::Dp => {
                    // (cos_0..cos_{D-1}, sin_0..sin_{D-1}) into D blocks (cos_i, sin_i)
                    let n = phi.len() / 2;
                    (0..n).flat_map(|i| [phi[i], phi[n + i]]).collect()
                }
                _ => p.lift(a, phi, cost),
            },
        }
    }

    fn combine(&self, u: &[f64], lifted: &[f64], cost: &mut Cost) -> Vec<f64> {
        match &self.algebra {
            Algebra::Kronecker => {
                cost.add_flops(u.len() * lifted.len());
                let mut out = Vec::with_capacity(u.len() * lifted.len());
                for &a in u {
                    out.extend(lifted.iter().map(|b| a * b));
                }
                out
            }
            Algebra::Projected(p) => p.combine(u, lifted, cost),
        }
    }

    fn transform_one(&self, x: ArrayView2<'_, f64>) -> (Vec<Vec<f64>>, Cost) {
        let cfg = &self.config;
        let m_max = cfg.n_levels;
        let p = cfg.order.resolve(m_max);
        let mut cost = Cost::default();
        let mut levels: Vec<Vec<f64>> = (0..=m_max).map(|m| vec![0.0; self.widths[m]]).collect();
        levels[0] = vec![1.0];
        if m_max == 0 {
            return (levels, cost);
        }
        let unit = self.unit();
        let sw = self.statics[0].out_dim();
        let mut prev_phi = vec![vec![0.0; sw]; m_max];
        let mut cur_phi = vec![vec![0.0; sw]; m_max];
        let mut inv_fact = vec![1.0; p + 1];
        for q in 1..=p {
            inv_fact[q] = inv_fact[q - 1] / q as f64;
        }
        let live: usize = self.widths.iter().sum::<usize>() * 2 + 2 * m_max * sw;
        cost.observe_floats(live);

        let start = if cfg.difference { 1 } else { 0 };
        if cfg.difference {
            for a in 0..m_max {
                self.statics[a].transform_into(x.row(0), &mut prev_phi[a], &mut cost);
            }
        }
        for t in start..x.nrows() {
            let mut lifts = Vec::with_capacity(m_max);
            for a in 0..m_max {
                self.statics[a].transform_into(x.row(t), &mut cur_phi[a], &mut cost);
                let v: Vec<f64> = if cfg.difference {
                    cur_phi[a].iter().zip(&prev_phi[a]).map(|(c, p)| c - p).collect()
                } else {
                    cur_phi[a].clone()
                };
                lifts.push(self.lift(a, &v, &mut cost));
            }
            let mut updates: Vec<Vec<f64>> = Vec::with_capacity(m_max);
            for m in 1..=m_max {
                let mut acc = vec![0.0; self.widths[m]];
                for q in 1..=p.min(m) {
                    let base = if m == q { &unit } else { &levels[m - q] };
                    let mut chain = self.combine(base, &lifts[m - q], &mut cost);
                    for lifted in &lifts[m - q + 1..m] {
                        chain = self.combine(&chain, lifted, &mut cost);
                    }
                    let w = inv_fact[q];
                    acc.iter_mut().zip(&chain).for_each(|(a, c)| *a += w * c);
                    cost.add_flops(chain.len());
                }
                updates.push(acc);
            }
            for (m, upd) in updates.into_iter().enumerate() {
                levels[m + 1].iter_mut().zip(&upd).for_each(|(l, u)| *l += u);
            }
            cost.add_flops(self.widths[1..].iter().sum());
            if cfg.difference {
                std::mem::swap(&mut prev_phi, &mut cur_phi);
            }
        }
        (levels, cost)
    }
}

/// Level blocks `B_0, …, B_M`; block `m` is `N × F_m` and `B_0` is a column
/// of ones.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelBlocks {
    pub blocks: Vec<Array2<f64>>,
}

impl LevelBlocks {
    pub fn n_levels(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn widths(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.ncols()).collect()
    }

    /// Concatenates the blocks into one `N × ΣF_m` matrix.
    pub fn concat(&self) -> Array2<f64> {
        let views: Vec<_> = self.blocks.iter().map(|b| b.view()).collect();
        ndarray::concatenate(ndarray::Axis(1), &views).expect("equal row counts")
    }

    /// Splits a concatenated matrix back into blocks of the given widths.
    pub fn from_matrix(m: ArrayView2<'_, f64>, widths: &[usize]) -> Result<Self> {
        if widths.iter().sum::<usize>() != m.ncols() || widths.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: widths.iter().sum(),
                got: m.ncols(),
            });
        }
        let mut off = 0;
        let blocks = widths
            .iter()
            .map(|&w| {
                let b = m.slice(s![.., off..off + w]).to_owned();
                off += w;
                b
            })
            .collect();
        Ok(LevelBlocks { blocks })
    }

    /// Row-wise unit-norm levels scaled by `1/√(M+1)`.
    pub fn normalized(&self) -> LevelBlocks {
        let scale = 1.0 / (self.blocks.len() as f64).sqrt();
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let mut b = b.clone();
                for mut row in b.rows_mut() {
                    let norm = row.dot(&row).sqrt();
                    if norm > 0.0 {
                        row.mapv_inplace(|v| v / norm * scale);
                    }
                }
                b
            })
            .collect();
        LevelBlocks { blocks }
    }

    /// Concatenated features, normalized if requested.
    pub fn features(&self, normalize: bool) -> Array2<f64> {
        if normalize { normalize_levels(self) } else { self.concat() }
    }
}

/// Scales each row's level blocks to unit norm (zero blocks stay zero),
/// then the row by `1/√(M+1)`, and concatenates.
pub fn normalize_levels(blocks: &LevelBlocks) -> Array2<f64> {
    blocks.normalized().concat()
}

pub fn transform_sig_features(state: &SigFeatureState, x: &SequenceBatch) -> Result<LevelBlocks> {
    transform_sig_features_with_cost(state, x).map(|(b, _)| b)
}

/// As [`transform_sig_features`], also returning the summed cost of the
/// per-sequence recursions.
pub fn transform_sig_features_with_cost(state: &SigFeatureState, x: &SequenceBatch) -> Result<(LevelBlocks, Cost)> {
    if x.dim() != state.input_dim {
        return Err(Error::DimensionMismatch {
            expected: state.input_dim,
            got: x.dim(),
        });
    }
    let per_seq: Vec<(Vec<Vec<f64>>, Cost)> = (0..x.n()).into_par_iter().map(|i| state.transform_one(x.sequence(i))).collect();
    let n = x.n();
    let blocks = state
        .widths
        .iter()
        .enumerate()
        .map(|(m, &w)| Array2::from_shape_fn((n, w), |(i, j)| per_seq[i].0[m][j]))
        .collect();
    let cost = per_seq.iter().map(|(_, c)| *c).sum();
    Ok((LevelBlocks { blocks }, cost))
}
