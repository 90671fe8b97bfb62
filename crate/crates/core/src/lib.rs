//! Numerical laboratory for the Rosenblatt process, Wiener-Rosenblatt
//! integrals and Rosenblatt Ornstein-Uhlenbeck processes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cumulant;
pub mod error;
pub mod galerkin;
pub mod kernel;
pub mod limits;
pub mod power_counting;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
