//! Bell–Clauser–Horne tests with noisy photon-number sign measurements.
//!
//! Two modes in a pair-coherent state are each mixed with a strong local
//! oscillator; each station records the sign of a photon-count difference
//! plus Gaussian detection noise. [`bell`] evaluates the ratio `S` exactly
//! in a truncated Fock basis, [`homodyne`] in the large-amplitude quadrature
//! limit, and [`lhv`] checks the corresponding local and macroscopically
//! local bounds on random models.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bell;
pub mod cli;
pub mod error;
pub mod fockspace;
pub mod homodyne;
pub mod lhv;
pub mod linalg;
pub mod specfun;

pub use error::{Error, Result};
