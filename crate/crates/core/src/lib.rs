//! Randomized dyadic cubes, spline multiresolution analysis and orthonormal
//! wavelet bases on finite quasi-metric measure spaces.
//!
//! The pipeline is
//! [`space`] → [`nets`] → [`order`] → [`randomized`] → [`splines`] →
//! [`mra`] → [`wavelets`] → [`analysis`].
//! Every stage is pure and allocation-only; file formats, the command line and
//! reporting live in the `hwave` companion crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected with the bad value
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod mra;
pub mod nets;
pub mod order;
pub mod pipeline;
pub mod randomized;
pub mod report;
pub mod rng;
pub mod space;
pub mod splines;
pub mod wavelets;

mod mathf;

pub use error::{Error, Result};
pub use mra::GramSystem;
pub use nets::{Mode, NetHierarchy};
pub use order::ReferenceOrder;
pub use pipeline::Pipeline;
pub use randomized::{DyadicSampler, OmegaSample, RandomizedSystem};
pub use report::{Check, Report};
pub use space::{FiniteSpace, SpaceConstants, SpaceSpec, WeightRule};
pub use splines::{SplineTable, TransitionSystem};
pub use wavelets::WaveletBasis;
