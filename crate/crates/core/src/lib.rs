//! Simulation of improper (noncircular) complex-valued stationary Gaussian
//! processes, specified in the time domain by an autocovariance and a
//! complementary covariance sequence.
//!
//! The sampler embeds the equivalent bivariate covariance structure into
//! circulant matrices, diagonalizes them with FFTs, correlates frequency
//! components through per-bin 2x2 Cholesky factors, and transforms back —
//! one run costs 5 FFTs of length 2m and yields two independent sequences.
//! The output law is exact whenever the circulant spectra are nonnegative;
//! the [`exactness`] module decides ahead of time when that is guaranteed,
//! and [`embedding::NegEigPolicy`] governs what happens when it is not.
//!
//! All numeric code is generic over the scalar type via [`scalar::Scalar`]
//! (`f32` or `f64`); the `*64` aliases below fix the common choice.
//!
//! ```
//! use noncirc::covariance::{CovarianceSource, FgnParams};
//! use noncirc::embedding::NegEigPolicy;
//! use noncirc::sampler::simulate_batch;
//!
//! // Unit-variance improper fractional Gaussian noise, H = 0.75.
//! let params = FgnParams::unit_variance(0.75f64, 0.5).unwrap();
//! let batch = simulate_batch(
//!     &CovarianceSource::Fgn(params),
//!     256,
//!     10,
//!     NegEigPolicy::strict(),
//!     42,
//! )
//! .unwrap();
//! assert_eq!(batch.sequences.len(), 10);
//! ```

// Index loops mirror the matrix subscripts throughout the dense algebra.
#![allow(clippy::needless_range_loop)]

pub mod covariance;
pub mod embedding;
pub mod exactness;
pub mod fft;
pub mod sampler;
pub mod scalar;
pub mod special;
pub mod validation;

pub use scalar::Scalar;

/// Double-precision aliases for the main pipeline types.
pub type CovarianceSpec64 = covariance::CovarianceSpec<f64>;
pub type BivariateCovariance64 = covariance::BivariateCovariance<f64>;
pub type FgnParams64 = covariance::FgnParams<f64>;
pub type CovarianceSource64 = covariance::CovarianceSource<f64>;
pub type EigenSpectrum64 = embedding::EigenSpectrum<f64>;
pub type SamplePair64 = sampler::SamplePair<f64>;
pub type FftEngine64 = fft::FftEngine<f64>;

/// Single-precision aliases.
pub type CovarianceSpec32 = covariance::CovarianceSpec<f32>;
pub type BivariateCovariance32 = covariance::BivariateCovariance<f32>;
pub type FgnParams32 = covariance::FgnParams<f32>;
pub type CovarianceSource32 = covariance::CovarianceSource<f32>;
pub type EigenSpectrum32 = embedding::EigenSpectrum<f32>;
pub type SamplePair32 = sampler::SamplePair<f32>;
pub type FftEngine32 = fft::FftEngine<f32>;
