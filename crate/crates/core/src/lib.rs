//! Long-term voltage stability of lossless networks with load tap-changers.
//!
//! The crate covers the closed-form two-bus case, simulation of the networked
//! tap dynamics, the maximal equilibrium and the set `P` whose points certify
//! regions of attraction, a conic monitoring problem with minimal
//! demand-side support, and a consensus ADMM solver for that problem.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod cli;
pub mod conic;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod fixtures;
mod linalg;
pub mod monitor;
pub mod network;
pub mod twobus;

pub use error::{Error, Result};
