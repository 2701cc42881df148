//! Selective inference for hierarchical clustering.
//!
//! Testing whether two clusters found by hierarchical clustering have equal
//! means with a classical (Wald) test is invalid: the clusters were chosen
//! *because* they look different, so null p-values pile up near zero. This
//! crate computes p-values that condition on the clustering outcome instead.
//! The key object is the truncation set: the set of cluster separations
//! `phi` for which re-clustering the perturbed data still yields both tested
//! clusters. Conditional on that set, the separation statistic follows a
//! truncated scaled-chi distribution with q degrees of freedom, and the
//! p-value is its upper-tail mass at the observed value.
//!
//! The crate provides:
//!
//! - [`hclust`]: agglomerative clustering over squared Euclidean
//!   dissimilarity for seven linkages, recording the merge metadata
//!   (winners, heights, lifetimes, losing pairs, inversions) the truncation
//!   machinery needs;
//! - [`truncation`]: exact truncation sets for the five Lance-Williams
//!   linkages and for single linkage, a known-covariance variant, and a
//!   brute-force reclustering oracle for validation;
//! - [`inference`]: exact, Monte Carlo, known-covariance, and plug-in
//!   p-values, plus Wald baselines;
//! - [`sim`]: reproducible simulation studies (null calibration, conditional
//!   power, split-sample plug-in, power versus effect size).
//!
//! Row indices are 0-based throughout the library; user-facing 1-based
//! conversion is the caller's concern.

#![deny(missing_docs)]

pub mod cov;
mod error;
pub mod hclust;
pub mod inference;
pub mod intervals;
pub mod model;
mod seeding;
pub mod sim;
mod special;
pub mod truncation;

pub use error::{Error, Result};
