#![cfg_attr(not(feature = "std"), no_std)]

//! One-bit covariance estimation with dithered sign quantizers.
//!
//! Every sample vector is quantized entry-wise to two bits,
//! `sign(x + tau)` and `sign(x + tau_bar)`, with independent uniform dithers.
//! The dither scale is either fixed, adapted on the fly from the samples
//! already seen (globally or per coordinate), or supplied by an oracle.
//! The crate contains:
//!
//! - [`linalg`]: small dense matrices, Cholesky, a cyclic Jacobi eigensolver
//!   and the matrix norms used to score estimates.
//! - [`sampling`]: counter-based random streams, Gaussian and uniform samplers.
//! - [`quantize`]: the sign quantizer, dither policies and the `.obcv` codec.
//! - [`estimators`]: sample covariance and the quantized estimators.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is off.
//! All transcendental functions go through `libm` so results are bit-stable
//! across platforms.

extern crate alloc;

pub mod error;
pub mod estimators;
pub mod linalg;
pub mod quantize;
pub mod sampling;

pub use error::{Error, Result};
pub use estimators::{ErrorNorm, EstimatorKind};
pub use linalg::{Matrix, SymMatrix};
pub use quantize::{
    DitherPolicy, DitherState, PolicyTag, QuantizedSample, SampleStream, Scale, SignVector,
};
pub use sampling::{GaussianModel, RngStream};
