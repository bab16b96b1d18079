//! Tabulation of ragged sequences and path augmentations.

use ndarray::{Array2, Array3, ArrayView2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqcore::{RaggedSequenceSet, SequenceBatch};

/// Fills missing (NaN) entries of each channel by linear interpolation
/// between the nearest observed indices; leading and trailing gaps take the
/// nearest observed value.
fn fill_missing(x: &Array2<f64>, sequence: usize) -> Result<Array2<f64>> {
    let mut out = x.clone();
    for c in 0..x.ncols() {
        let obs: Vec<usize> = (0..x.nrows()).filter(|&i| !x[[i, c]].is_nan()).collect();
        if obs.len() < 2 {
            return Err(Error::Tabulation {
                sequence,
                channel: c,
                message: format!("only {} observed value(s); at least 2 are needed", obs.len()),
            });
        }
        if obs.len() == x.nrows() {
            continue;
        }
        let (first, last) = (obs[0], obs[obs.len() - 1]);
        for i in 0..first {
            out[[i, c]] = x[[first, c]];
        }
        for i in last + 1..x.nrows() {
            out[[i, c]] = x[[last, c]];
        }
        for w in obs.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (va, vb) = (x[[a, c]], x[[b, c]]);
            for i in a + 1..b {
                let frac = (i - a) as f64 / (b - a) as f64;
                out[[i, c]] = va + frac * (vb - va);
            }
        }
    }
    Ok(out)
}

/// Resamples `x` to `target` points at `t = i/(target−1)` on the linear
/// interpolant through its points. Points falling exactly on input samples
/// are copied.
pub fn resample(x: ArrayView2<'_, f64>, target: usize) -> Result<Array2<f64>> {
    if target < 2 {
        return Err(Error::invalid(format!("target length must be at least 2, got {target}")));
    }
    let l = x.nrows();
    if l == 0 {
        return Err(Error::invalid("cannot resample an empty sequence"));
    }
    let mut out = Array2::zeros((target, x.ncols()));
    let den = target - 1;
    for i in 0..target {
        let num = i * (l - 1);
        let (k, rem) = (num / den, num % den);
        if rem == 0 {
            out.row_mut(i).assign(&x.row(k));
        } else {
            let frac = rem as f64 / den as f64;
            for c in 0..x.ncols() {
                out[[i, c]] = x[[k, c]] + frac * (x[[k + 1, c]] - x[[k, c]]);
            }
        }
    }
    Ok(out)
}

/// Brings ragged, possibly incomplete sequences to a common length
/// `min(longest, max_len)`.
pub fn tabulate(seqs: &RaggedSequenceSet, max_len: Option<usize>) -> Result<SequenceBatch> {
    if seqs.is_empty() {
        return Err(Error::invalid("no sequences to tabulate"));
    }
    if let Some(m) = max_len {
        if m < 2 {
            return Err(Error::invalid(format!("max_len must be at least 2, got {m}")));
        }
    }
    let target = max_len.map_or(seqs.max_len(), |m| m.min(seqs.max_len()));
    let rows: Vec<Array2<f64>> = seqs
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let filled = fill_missing(s, i)?;
            resample(filled.view(), target)
        })
        .collect::<Result<_>>()?;
    SequenceBatch::from_sequences(&rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentorOptions {
    pub normalize: bool,
    pub lead_lag: bool,
    pub add_time: bool,
    pub basepoint: bool,
    pub max_time: f64,
    pub max_len: Option<usize>,
}

impl Default for AugmentorOptions {
    fn default() -> Self {
        AugmentorOptions {
            normalize: false,
            lead_lag: false,
            add_time: false,
            basepoint: false,
            max_time: 1.0,
            max_len: None,
        }
    }
}

impl AugmentorOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_time > 0.0 && self.max_time.is_finite()) {
            return Err(Error::invalid(format!("max_time must be positive, got {}", self.max_time)));
        }
        if let Some(m) = self.max_len {
            if m < 2 {
                return Err(Error::invalid(format!("max_len must be at least 2, got {m}")));
            }
        }
        Ok(())
    }
}

/// Augmentation pipeline with the normalization scale frozen at fit time.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmentor {
    opts: AugmentorOptions,
    scale: Option<f64>,
}

impl Augmentor {
    pub fn fit(opts: AugmentorOptions, train: &SequenceBatch) -> Result<Self> {
        opts.validate()?;
        let scale = opts.normalize.then(|| train.data().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        Ok(Augmentor { opts, scale })
    }

    pub fn options(&self) -> &AugmentorOptions {
        &self.opts
    }

    /// Applies normalize, lead-lag, time channel, basepoint and down-sampling,
    /// in that order.
    pub fn transform(&self, batch: &SequenceBatch) -> Result<SequenceBatch> {
        let o = &self.opts;
        let mut x = batch.data().clone();
        if let Some(s) = self.scale.filter(|&s| s > 0.0) {
            x.mapv_inplace(|v| v / s);
        }
        if o.lead_lag {
            let (n, l, d) = x.dim();
            if l < 2 {
                return Err(Error::invalid("lead-lag needs sequences of length at least 2"));
            }
            x = Array3::from_shape_fn((n, l - 1, 2 * d), |(i, t, c)| if c < d { x[[i, t + 1, c]] } else { x[[i, t, c - d]] });
        }
        if o.add_time {
            let (n, l, d) = x.dim();
            let denom = (l.max(2) - 1) as f64;
            x = Array3::from_shape_fn((n, l, d + 1), |(i, t, c)| {
                if c == 0 { o.max_time * t as f64 / denom } else { x[[i, t, c - 1]] }
            });
        }
        if o.basepoint {
            let (n, l, d) = x.dim();
            x = Array3::from_shape_fn((n, l + 1, d), |(i, t, c)| if t == 0 { 0.0 } else { x[[i, t - 1, c]] });
        }
        let mut out = SequenceBatch::new(x)?;
        if let Some(m) = o.max_len {
            if m < out.len() {
                let rows: Vec<Array2<f64>> = (0..out.n()).map(|i| resample(out.sequence(i), m)).collect::<Result<_>>()?;
                out = SequenceBatch::from_sequences(&rows)?;
            }
        }
        Ok(out)
    }
}

/// Fits an [`Augmentor`] on `batch` and applies it to the same batch.
pub fn augment(batch: &SequenceBatch, opts: AugmentorOptions) -> Result<SequenceBatch> {
    Augmentor::fit(opts, batch)?.transform(batch)
}
