//! Sequence containers, seeded randomness, CSV I/O and synthetic Brownian paths.
//!
//! A stored sequence has `L` points `x_0, ..., x_{L-1}`; its effective length
//! (the number of increments) is `L - 1`.

mod brownian;
mod csvio;
mod rng;

pub use brownian::{gen_brownian, gen_brownian_with_drift};
pub use csvio::{
    load_matrix_csv, load_sequences_csv, parse_matrix_csv, parse_sequences_csv,
    write_matrix_csv, write_sequences_csv, format_matrix_csv,
};
pub use rng::{SeedRng, SeedStream};

use ndarray::{s, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};

/// A batch of `n` sequences sharing length `len` and dimension `dim`.
///
/// Stored as an `n × len × dim` array. Every entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceBatch {
    data: Array3<f64>,
}

impl SequenceBatch {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (n, len, dim) = data.dim();
        if n == 0 || len == 0 || dim == 0 {
            return Err(Error::invalid(format!(
                "sequence batch must be non-empty, got shape {n}x{len}x{dim}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sequence batch"));
        }
        Ok(SequenceBatch { data })
    }

    /// Stacks equally shaped `len × dim` matrices.
    pub fn from_sequences(seqs: &[Array2<f64>]) -> Result<Self> {
        let first = seqs
            .first()
            .ok_or_else(|| Error::invalid("no sequences given"))?;
        let (len, dim) = first.dim();
        let mut data = Array3::zeros((seqs.len(), len, dim));
        for (i, s) in seqs.iter().enumerate() {
            if s.dim() != (len, dim) {
                return Err(Error::invalid(format!(
                    "sequence {i} has shape {:?}, expected {:?}",
                    s.dim(),
                    (len, dim)
                )));
            }
            data.index_axis_mut(Axis(0), i).assign(s);
        }
        SequenceBatch::new(data)
    }

    pub fn n(&self) -> usize {
        self.data.dim().0
    }

    pub fn len(&self) -> usize {
        self.data.dim().1
    }

    pub fn dim(&self) -> usize {
        self.data.dim().2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sequence(&self, i: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), i)
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array3<f64> {
        self.data
    }

    /// Sequences `start..end` as a new batch.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n() {
            return Err(Error::invalid(format!(
                "slice {start}..{end} out of range for {} sequences",
                self.n()
            )));
        }
        SequenceBatch::new(self.data.slice(s![start..end, .., ..]).to_owned())
    }

    /// Sequences at the given indices, in order.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if idx.iter().any(|&i| i >= self.n()) {
            return Err(Error::invalid("selection index out of range"));
        }
        SequenceBatch::new(self.data.select(Axis(0), idx))
    }

    /// Concatenates two batches of identical `len` and `dim`.
    pub fn concat(&self, other: &SequenceBatch) -> Result<Self> {
        if self.len() != other.len() || self.dim() != other.dim() {
            return Err(Error::invalid("cannot concatenate batches of different shape"));
        }
        let data = ndarray::concatenate(Axis(0), &[self.data.view(), other.data.view()])
            .expect("shapes checked");
        SequenceBatch::new(data)
    }

    /// All time steps of all sequences as rows of an `(n·len) × dim` matrix.
    pub fn pooled_steps(&self) -> Array2<f64> {
        let (n, len, dim) = self.data.dim();
        self.data
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((n * len, dim))
            .expect("contiguous")
    }
}

/// A collection of sequences of varying length sharing one dimension.
///
/// Missing observations are stored as NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct RaggedSequenceSet {
    seqs: Vec<Array2<f64>>,
    dim: usize,
}

impl RaggedSequenceSet {
    pub fn new(seqs: Vec<Array2<f64>>) -> Result<Self> {
        let dim = seqs
            .first()
            .map(|s| s.ncols())
            .ok_or_else(|| Error::invalid("empty sequence set"))?;
        if dim == 0 {
            return Err(Error::invalid("sequences must have at least one channel"));
        }
        if let Some(i) = seqs.iter().position(|s| s.ncols() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: seqs[i].ncols(),
            });
        }
        if seqs.iter().any(|s| s.iter().any(|v| v.is_infinite())) {
            return Err(Error::NonFinite("sequence set"));
        }
        Ok(RaggedSequenceSet { seqs, dim })
    }

    pub fn len(&self) -> usize {
        self.seqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seqs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sequences(&self) -> &[Array2<f64>] {
        &self.seqs
    }

    pub fn get(&self, i: usize) -> Option<&Array2<f64>> {
        self.seqs.get(i)
    }

    pub fn max_len(&self) -> usize {
        self.seqs.iter().map(|s| s.nrows()).max().unwrap_or(0)
    }
}

impl From<&SequenceBatch> for RaggedSequenceSet {
    fn from(batch: &SequenceBatch) -> Self {
        let seqs = (0..batch.n()).map(|i| batch.sequence(i).to_owned()).collect();
        RaggedSequenceSet {
            seqs,
            dim: batch.dim(),
        }
    }
}

/// Rejects non-finite entries in a single sequence.
pub(crate) fn check_finite(x: ArrayView2<'_, f64>, what: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
