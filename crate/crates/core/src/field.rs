//! Scalar fields the solver runs over: real `f64` and complex `Complex64`.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::xforms::{self, TransformKind};

/// A signal entry type. Real signals pair with Hadamard blocks, complex
/// signals with Fourier blocks.
pub trait Field:
    Copy
    + Debug
    + Default
    + PartialEq
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Neg<Output = Self>
    + Mul<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + 'static
{
    const IS_COMPLEX: bool;

    fn zero() -> Self {
        Self::default()
    }
    fn from_real(x: f64) -> Self;
    fn conj(self) -> Self;
    fn norm_sqr(self) -> f64;
    fn is_finite(self) -> bool;

    /// Applies the orthonormal transform of `kind` to `buf` in place.
    fn transform(kind: TransformKind, buf: &mut [Self], inverse: bool) -> Result<()>;
}

impl Field for f64 {
    const IS_COMPLEX: bool = false;

    fn from_real(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn norm_sqr(self) -> f64 {
        self * self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
    fn transform(kind: TransformKind, buf: &mut [Self], _inverse: bool) -> Result<()> {
        match kind {
            TransformKind::Hadamard => xforms::fwht_in_place(buf),
            TransformKind::Fourier => Err(Error::FieldMismatch(
                "Fourier blocks require complex signals",
            )),
        }
    }
}

impl Field for Complex64 {
    const IS_COMPLEX: bool = true;

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn norm_sqr(self) -> f64 {
        Complex64::norm_sqr(&self)
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
    fn transform(kind: TransformKind, buf: &mut [Self], inverse: bool) -> Result<()> {
        match kind {
            TransformKind::Fourier if inverse => xforms::idft_in_place(buf),
            TransformKind::Fourier => xforms::dft_in_place(buf),
            TransformKind::Hadamard => Err(Error::FieldMismatch(
                "Hadamard blocks require real signals",
            )),
        }
    }
}

/// Hermitian inner product `sum conj(a_i) * b_i`.
pub fn inner<T: Field>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x.conj() * y)
}

pub fn norm2<T: Field>(a: &[T]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
