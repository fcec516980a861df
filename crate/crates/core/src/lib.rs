//! Neutral substitutional nitrogen (N_s⁰) in diamond from UV-Vis spectra.
//!
//! The absorption spectrum is decomposed into Gaussian bands at 270, 360 and
//! 520 nm, a `R·λ⁻³` ramp and a weighted electronic-grade reference spectrum.
//! The fitted 270 nm band height `μ₂₇₀` divided by the absorption
//! cross-section gives the concentration in ppm.
//!
//! Module map:
//! - [`spectrum`]: spectra, Lambert-Beer conversion, resampling, cropping
//! - [`model`]: the component model and its analytic Jacobian
//! - [`fitter`]: box-constrained least squares and the boundary-hit rule
//! - [`analysis`]: concentration, cross-sections, EPR calibration
//! - [`synth`]: synthetic spectra with known ground truth
//! - [`io`]: spectrum files, reports, plot data
//! - [`pipeline`]: file to report, single and batch
//! - [`cli`]: the `nsfit` command line

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod fitter;
pub mod io;
mod lm;
pub mod model;
pub mod pipeline;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
