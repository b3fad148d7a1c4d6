//! Two-sample and independence hypothesis testing built on pairwise
//! distances and the kernels they induce.
//!
//! The crate centers on one algebraic fact: for a semimetric of negative
//! type, the energy distance between two distributions equals (twice) the
//! squared RKHS distance between their kernel embeddings under the induced
//! distance kernel, and likewise distance covariance equals HSIC under the
//! induced product kernel. Both families of statistics are therefore
//! computed here from the same pairwise evaluations, and each identity is
//! kept testable by implementing the two sides independently.
//!
//! Modules:
//!
//! * [`kernels`] — semimetrics `||z - z'||^q`, kernel-generated semimetrics,
//!   distance-induced kernels, Gaussian and product kernels, Gram matrices
//!   and centering;
//! * [`stats`] — energy distance, MMD, distance covariance, HSIC and
//!   distance correlation as biased V-statistics;
//! * [`null`] — spectral (weighted chi-square), permutation and
//!   quadratic-bound nulls, plus the calibrated test runners;
//! * [`datagen`] — seeded generators for the synthetic benchmarks;
//! * [`experiment`] — the power-curve harness and its CSV/JSON formats;
//! * [`sample`] — dense samples and the headerless CSV exchange format.

pub mod datagen;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod null;
pub mod rng;
pub mod sample;
pub mod stats;
mod sum;

pub use error::{Error, Result};
pub use kernels::{GramMatrix, KernelSpec, SemimetricSpec};
pub use null::{NullDistribution, NullMethod, SpectralScale, TestConfig, TestOutcome};
pub use sample::{PairedSample, Sample};
