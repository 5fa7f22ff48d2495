//! Cartesian credible sets for Bayesian variable selection.
//!
//! The crate post-processes a sample of inclusion vectors (from any sampler)
//! into a factorized summary of model uncertainty: a partition of the
//! variables into blocks, learned by agglomerative merging under a
//! Kullback-Leibler criterion, and a per-block set of plausible sub-models
//! whose Cartesian product carries at least the requested posterior mass.
//!
//! It also ships a small spike-and-slab linear-regression sampler, two
//! synthetic data generators and (behind the `oracle` feature) brute-force
//! reference implementations for validating results on small problems.

pub mod bvs;
pub mod credible;
pub mod datagen;
pub mod error;
pub mod factorization;
pub mod io;
pub mod model;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod pipeline;
pub mod summaries;

pub use error::{Error, Result};
pub use model::{BlockDistribution, Model, Partition, SampleTrace, SubModel};

/// Relative slack used when checking that a probability reaches a credible
/// level. Masses are ratios of counts while `lambda` is a decimal literal,
/// so an exact float comparison would reject e.g. 9/10 against 0.9.
pub const LEVEL_TOL: f64 = 1e-12;

/// `mass ≥ lambda` up to [`LEVEL_TOL`].
#[inline]
pub fn reaches_level(mass: f64, lambda: f64) -> bool {
    mass >= lambda * (1.0 - LEVEL_TOL)
}

/// Log-space form of [`reaches_level`].
#[inline]
pub fn reaches_log_level(log_mass: f64, lambda: f64) -> bool {
    log_mass >= lambda.ln() - LEVEL_TOL
}
