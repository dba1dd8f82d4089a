//! Numerical laboratory for the hybrid inverse problem of recovering `q` in
//! `Δu + qu = 0` from the internal energy density `qu²` and Dirichlet data.

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod counterexample;
pub mod diagnostics;
pub mod error;
pub mod fields;
pub mod forward;
pub mod harness;
pub mod linalg;
pub mod recon;
pub mod synth;

pub use error::{Error, Result};
