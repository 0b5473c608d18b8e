//! Floating-point element traits shared by the FFT, GEMV, and pipeline code.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul};

use num_complex::Complex;

use crate::precision::Precision;

/// A real IEEE-754 type the pipeline can compute in: `f32` or `f64`.
pub trait Real:
    realfft::FftNum + num_traits::Float + num_traits::NumAssign + Default + Sum + Send + Sync + Debug + 'static
{
    const PRECISION: Precision;

    fn to_double(self) -> f64;

    /// Round-to-nearest-even narrowing for `f32`, identity for `f64`.
    fn from_double(x: f64) -> Self;

    /// Cast to another real type. Widening is exact; narrowing rounds once.
    #[inline(always)]
    fn cast<U: Real>(self) -> U {
        U::from_double(self.to_double())
    }
}

impl Real for f32 {
    const PRECISION: Precision = Precision::Single;

    #[inline(always)]
    fn to_double(self) -> f64 {
        self as f64
    }

    #[inline(always)]
    fn from_double(x: f64) -> Self {
        x as f32
    }
}

impl Real for f64 {
    const PRECISION: Precision = Precision::Double;

    #[inline(always)]
    fn to_double(self) -> f64 {
        self
    }

    #[inline(always)]
    fn from_double(x: f64) -> Self {
        x
    }
}

/// A GEMV operand: one of the four BLAS datatypes (s, d, c, z).
pub trait Element:
    Copy + Send + Sync + Debug + PartialEq + Add<Output = Self> + Mul<Output = Self> + AddAssign + 'static
{
    type Real: Real;
    const IS_COMPLEX: bool;

    fn zero() -> Self;
    fn conj(self) -> Self;

    /// Magnitude used by tolerance checks.
    fn abs_f64(self) -> f64;

    fn precision() -> Precision {
        <Self::Real as Real>::PRECISION
    }

    fn size_bytes() -> usize {
        std::mem::size_of::<Self>()
    }
}

macro_rules! impl_real_element {
    ($t:ty) => {
        impl Element for $t {
            type Real = $t;
            const IS_COMPLEX: bool = false;

            #[inline(always)]
            fn zero() -> Self {
                0.0
            }

            #[inline(always)]
            fn conj(self) -> Self {
                self
            }

            fn abs_f64(self) -> f64 {
                (self as f64).abs()
            }
        }
    };
}

impl_real_element!(f32);
impl_real_element!(f64);

impl<T: Real> Element for Complex<T> {
    type Real = T;
    const IS_COMPLEX: bool = true;

    #[inline(always)]
    fn zero() -> Self {
        Complex::new(T::zero(), T::zero())
    }

    #[inline(always)]
    fn conj(self) -> Self {
        Complex::new(self.re, -self.im)
    }

    fn abs_f64(self) -> f64 {
        self.re.to_double().hypot(self.im.to_double())
    }
}

#[inline(always)]
pub(crate) fn cast_complex<T: Real, U: Real>(z: Complex<T>) -> Complex<U> {
    Complex::new(z.re.cast(), z.im.cast())
}
