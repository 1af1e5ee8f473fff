//! Dictionary learning with iterative thresholding and K signed means
//! (ITKsM) and K residual means (ITKrM).
//!
//! The crate is organised along the pipeline of an experiment:
//!
//! - [`dictionary`]: dictionaries, coherence and frame bounds, distances,
//!   Dirac+DCT and random constructions, perturbed initialisations.
//! - [`model`]: the sparse signal model and its gap statistics.
//! - [`sparse`]: thresholding and orthogonal projections.
//! - [`learner`]: one ITKsM/ITKrM iteration, online accumulation and the
//!   multi-iteration driver.
//! - [`bounds`]: convergence radii and limiting errors.
//! - [`dataio`]: matrix files, PGM images and patch extraction.
//! - [`harness`]: configured experiments writing CSV and binary outputs.
//!
//! Everything random takes an explicit generator; [`rng::seeded`] gives the
//! reproducible stream used throughout.

pub mod bounds;
pub mod dataio;
pub mod dictionary;
pub mod error;
pub mod harness;
pub mod learner;
pub mod model;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
