//! Refined approximations for sums of heavy-tailed i.i.d. variables: the
//! largest summands are represented through a Poisson ladder and the bulk by
//! a Gaussian with matching truncated variance.

// `!(x > 0.0)` rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod error_rates;
pub mod gamma_ladder;
pub mod mc_harness;
pub mod par;
pub mod quadrature;
pub mod refined_approx;
pub mod rng;
pub mod special;
pub mod tail_model;

pub use error::{Error, Result};
