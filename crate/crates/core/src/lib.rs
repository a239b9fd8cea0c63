//! Detection probabilities for oscillating particles when the detection
//! time is not observed.
//!
//! The crate is organized bottom-up:
//!
//! - [`measure`]: the finite-dimensional engine (restricted propagators,
//!   event amplitudes, time-unresolved probabilities) for any small system.
//! - [`oscillation`]: flavor amplitudes and the product-particle kernel
//!   `F(s)` for oscillation scenarios.
//! - [`engine`]: the detection density `p_α(L)` built by summing amplitudes
//!   over detection times, its brute-force oracle, and the three textbook
//!   baselines.
//! - [`analysis`]: analytic wavenumbers, damped-cosine fits and threshold
//!   scans.
//!
//! Natural units throughout: ħ = c = 1.

pub mod analysis;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod measure;
pub mod oscillation;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
