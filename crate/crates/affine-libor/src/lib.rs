//! Multiple-curve affine LIBOR model: Riccati exponents of affine drivers,
//! fitting to OIS and LIBOR curves, Fourier and linear-boundary pricing,
//! a terminal-measure Monte Carlo oracle, correlations and sequential
//! caplet calibration.

pub mod affine;
pub mod analytics;
pub mod calibration;
pub mod curves;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod pricing;

pub use error::{Error, Result};
