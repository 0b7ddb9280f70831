//! Lower-bound machinery for noisy Gaussian-process bandit optimization.
//!
//! The crate builds "needle in a haystack" function ensembles whose members
//! have bounded RKHS norm under squared-exponential or Matérn kernels,
//! certifies those norms through the spectral (Fourier-domain) formula,
//! simulates bandit algorithms against the ensemble, and evaluates the
//! sample-complexity and cumulative-regret thresholds that the construction
//! implies.
//!
//! Everything here is `no_std` + `alloc`. File formats, the command line
//! and parallel orchestration live in the `needlebound` crate.
//!
//! Conventions used throughout:
//!
//! * Fourier transforms are `F(ξ) = ∫ f(x) e^{-2πi x·ξ} dx`.
//! * Points are `&[f64]` slices of length `d` inside `[0, 1]^d`.
//! * Ensemble members are numbered `1..=M`; member `0` is the everywhere-zero
//!   reference function. Regions (grid cells) are numbered `1..=M` the same
//!   way, region `j` holding the peak of member `j`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod algorithms;
pub mod bounds;
pub mod ensemble;
mod error;
pub mod grid;
pub mod kernels;
pub mod quadrature;
pub mod rkhs;
pub mod simulator;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
