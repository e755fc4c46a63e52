//! Scalar abstraction: the numerical core is generic over the floating-point
//! type. `f64` is the working precision of the experiment harness; `f32`
//! builds are supported for the pure-math paths.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

/// Floating-point scalar usable everywhere in the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumAssign + rustfft::FftNum + Sum<Self> + Display + LowerExp + Debug
{
    /// Shorthand for lifting an `f64` literal into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + NumAssign + rustfft::FftNum + Sum<T> + Display + LowerExp + Debug
{
}

/// Scalars that the random samplers can draw directly.
///
/// Implemented concretely for `f32`/`f64` so that generic code does not have
/// to thread `StandardNormal: Distribution<T>` bounds everywhere.
pub trait RandScalar: Scalar {
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
    fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self;
    /// Draw from [0, 1) without constructing a distribution (hot loops).
    fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_rand_scalar {
    ($t:ty) => {
        impl RandScalar for $t {
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }
            fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: Self, hi: Self) -> Self {
                Uniform::new(lo, hi).sample(rng)
            }
            fn unit_uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.gen::<$t>()
            }
        }
    };
}

impl_rand_scalar!(f32);
impl_rand_scalar!(f64);
