//! Numerical core of a physiological digital twin.
//!
//! Everything here is allocation-only and `no_std`: a reverse-mode autodiff
//! tape, neural building blocks, graph-network blocks, Monte-Carlo dropout
//! rollouts, a conditional masked WGAN-GP, a surrogate cardiovascular and
//! renin-angiotensin ODE system, and an RNA-seq preprocessing and ridge
//! crosstalk pipeline. File formats, the CLI and the HTTP service live in the
//! `twin` crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod error;
pub mod forecast;
pub mod gan;
pub mod graph;
pub mod nn;
pub mod omics;
pub mod physio;
pub mod rng;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
