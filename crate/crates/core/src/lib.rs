//! Generalized correlation regression for clustered exponential-family data.
//!
//! Marginal means follow a canonical-link GLM and the within-cluster
//! correlation matrices are modelled through `vecl(log R_i) = W_i alpha`.
//! Estimation alternates GEE steps for the mean coefficients with
//! pseudo-likelihood scoring for the correlation coefficients.

// `!(x > tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corr_manifold;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod evalkit;
pub mod exp_family;
pub mod fitter;
pub mod inference;
pub mod par;
pub mod simgen;

pub use error::{GcrError, Result};
