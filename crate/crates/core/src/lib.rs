//! Overlapping-domain spectral splitting for the stochastic nonlinear
//! Schrödinger equation with multiplicative Stratonovich noise.

pub mod baselines;
pub mod chebyshev;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mesh;
pub mod noise;
pub mod observables;
pub mod stepper;

pub use error::{OddsError, Result};
pub use num_complex::Complex64 as C64;
