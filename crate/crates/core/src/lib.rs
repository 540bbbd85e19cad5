#![cfg_attr(not(feature = "std"), no_std)]
//! Vecchia-Laplace approximations for latent Gaussian process models with
//! non-Gaussian likelihoods.
//!
//! The heavy linear algebra runs through matrix-free iterative methods (preconditioned
//! conjugate gradients, stochastic Lanczos quadrature and stochastic trace estimation);
//! a dense Cholesky backend is kept as a reference.
//!
//! The crate is `no_std` with `alloc`. The `std` feature adds the chi-square quantile
//! used by the sample-size diagnostic and wall-clock timing; `parallel` runs independent
//! rows and probe solves on rayon with order-preserving reductions.

extern crate alloc;

pub mod covariance;
mod dense;
pub mod error;
pub mod iterative;
pub mod likelihood;
pub mod math;
pub mod precond;
mod par;
pub mod rng;
pub mod vecchia;
pub mod laplace;
pub mod predict;
pub mod estimate;
pub mod simulate;

pub use error::{Error, Result};
