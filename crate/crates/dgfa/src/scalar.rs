//! Scalar abstraction: every numerical kernel is generic over `f32`/`f64`.

use nalgebra::{DMatrix, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar type usable by all kernels. Implemented by `f32` and `f64`.
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy {}

impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Copy {}

/// Convert a finite `f64` constant into the working scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite constant representable in scalar type")
}

/// Widen a scalar back to `f64` (exact for `f32`/`f64`).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().expect("real scalar convertible to f64")
}

/// Machine epsilon of the working scalar, as `f64`.
#[inline]
pub fn eps<T: Scalar>() -> f64 {
    to_f64(T::default_epsilon())
}

/// A tolerance floor that keeps `f64` thresholds unchanged but relaxes them
/// to what a lower-precision scalar can actually achieve.
#[inline]
pub fn tol_floor<T: Scalar>(threshold: f64, eps_multiple: f64) -> f64 {
    threshold.max(eps_multiple * eps::<T>())
}

/// Build a `DMatrix<T>` from row-major `f64` data.
pub fn mat_from_f64<T: Scalar>(rows: usize, cols: usize, row_major: &[f64]) -> DMatrix<T> {
    assert_eq!(
        rows * cols,
        row_major.len(),
        "row-major data length mismatch"
    );
    DMatrix::from_row_iterator(rows, cols, row_major.iter().map(|&x| real::<T>(x)))
}
