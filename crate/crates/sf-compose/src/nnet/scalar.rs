//! Floating-point abstraction: training runs in `f32`, gradient-check tests
//! switch the same code paths to `f64`.

use std::fmt::Debug;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::distributions::uniform::SampleUniform;
use rand::Rng;
use rand_distr::StandardNormal;

pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + SampleUniform
    + Default
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Lossy constant conversion; used for literals in generic math.
    fn c(v: f64) -> Self;

    fn as_f64(self) -> f64;

    fn standard_normal<R: Rng>(rng: &mut R) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn c(v: f64) -> f32 {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }

    #[inline]
    fn standard_normal<R: Rng>(rng: &mut R) -> f32 {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f64 {
    #[inline]
    fn c(v: f64) -> f64 {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }

    #[inline]
    fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }
}
