//! Scalar abstraction over the floating-point type used by every numeric
//! routine in this crate. `f32` and `f64` are supported; the concrete
//! aliases at the crate root fix `f64` for the CLI and validation paths.

use std::fmt::Display;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the simulation pipeline.
pub trait Scalar:
    Float + FloatConst + FftNum + FromPrimitive + NumAssign + Sum<Self> + Display
{
    /// Converts an `f64` constant, panicking only on values unrepresentable
    /// by the target type (never the case for the constants used here).
    fn from_f64_c(value: f64) -> Self;

    /// Draws one standard normal (mean 0, variance 1) variate.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_scalar {
    ($($ty:ty),*) => {
        $(
            impl Scalar for $ty {
                #[inline]
                fn from_f64_c(value: f64) -> Self {
                    value as $ty
                }

                #[inline]
                fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                    StandardNormal.sample(rng)
                }
            }
        )*
    };
}

impl_scalar!(f32, f64);
