//! Signature kernels for multivariate sequences.

pub mod cost;
pub mod dualsig;
pub mod error;
pub mod metrics;
pub mod models;
pub mod preprocess;
pub mod primalsig;
pub mod projections;
pub mod seqcore;
pub mod staticfeat;
pub mod statickern;

pub use cost::Cost;
pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/static.md")]
    mod static_kernels {}
    #[doc = include_str!("../../../book/src/dual.md")]
    mod dual {}
    #[doc = include_str!("../../../book/src/primal.md")]
    mod primal {}
    #[doc = include_str!("../../../book/src/projections.md")]
    mod projections {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
}
