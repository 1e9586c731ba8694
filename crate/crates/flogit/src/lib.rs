//! Functional logistic regression with robust estimation.
//!
//! The pipeline turns discretely observed curves into B-spline coefficient
//! vectors, reduces dimension with a principal component method (classical or
//! projection pursuit with an M-scale), and fits the logistic link on the
//! resulting scores, either by maximum likelihood or by a weighted
//! Bianco-Yohai estimator that bounds the influence of outlying curves.

pub mod bspline;
pub mod error;
pub mod fpca;
pub mod funcsample;
pub mod logitfit;
pub mod metrics;
pub mod robust_scale;
pub mod simgen;

pub use error::FlogitError;
