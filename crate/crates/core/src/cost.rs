//! Operation and buffer accounting.
//!
//! Transforms and kernel solvers report a [`Cost`] alongside their output.
//! `flops` counts inner multiply-adds (a fused `a += b * c` counts once);
//! `peak_bytes` is the analytic size of the largest set of working buffers
//! alive at once. Both are integers, so merging per-item costs is exact and
//! independent of how work was scheduled across threads.

use std::ops::AddAssign;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cost {
    pub flops: u64,
    pub peak_bytes: u64,
}

impl Cost {
    pub fn new(flops: u64, peak_bytes: u64) -> Self {
        Cost { flops, peak_bytes }
    }

    #[inline]
    pub fn add_flops(&mut self, n: usize) {
        self.flops += n as u64;
    }

    /// Records a working set of `floats` f64 values.
    #[inline]
    pub fn observe_floats(&mut self, floats: usize) {
        self.peak_bytes = self.peak_bytes.max(8 * floats as u64);
    }

    /// Flops add up; peaks are taken as the maximum.
    pub fn merge(&mut self, other: Cost) {
        self.flops += other.flops;
        self.peak_bytes = self.peak_bytes.max(other.peak_bytes);
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        self.merge(rhs);
    }
}

impl std::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Self {
        let mut total = Cost::default();
        for c in iter {
            total.merge(c);
        }
        total
    }
}
