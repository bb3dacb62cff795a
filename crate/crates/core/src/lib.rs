#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degrade;
pub mod error;
pub mod fft;
pub mod metrics;
pub mod model;
pub mod pqmf;
pub mod rng;
pub mod signal;
pub mod spectral;
pub mod synth;
pub mod tensor;
pub mod window;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/pqmf.md")]
    pub mod pqmf {}
    #[doc = include_str!("../../../book/src/degrade.md")]
    pub mod degrade {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    pub mod analysis {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/model.md")]
    pub mod model {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
