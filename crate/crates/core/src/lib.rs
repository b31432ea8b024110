//! Count-data distributions, count regression and multiple imputation of a
//! missing count covariate.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and parallel scenario execution live in the `countimpute` crate.
//!
//! Module map:
//!
//! - [`distributions`]: Poisson, negative binomial, Hermite, COM-Poisson and
//!   zero-inflated pmfs, moments and inverse-CDF sampling.
//! - [`regression`]: maximum-likelihood count regression for every family,
//!   plus the linear / logistic / Poisson analysis models.
//! - [`missingness`]: MCAR and MAR amputation of the covariate.
//! - [`imputation`]: the draw-parameters-then-draw-counts imputation step,
//!   Rubin pooling and the listwise-deletion baseline.
//! - [`simulation`]: population generation, replicate loop and metrics.

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod distributions;
pub mod error;
pub mod imputation;
pub mod linalg;
pub mod missingness;
pub mod regression;
pub mod rng;
pub mod simulation;
pub mod special;

pub use error::{Error, Result};
