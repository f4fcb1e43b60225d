//! Real scalar abstraction shared by every numerical routine in the crate.

use nalgebra::{Complex, DMatrix, DVector, RealField};

/// Real scalar type the library is generic over (`f32` or `f64`).
///
/// All tolerances in the public API are expressed as `f64` constants and
/// converted on use, so `f32` instantiations work but cannot meet the tighter
/// default tolerances.
pub trait Real: RealField + Copy + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn cast(x: f64) -> Self {
        nalgebra::convert(x)
    }

    /// Widens the scalar to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_subset().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn epsilon() -> Self;

    /// `tol`, raised to a small multiple of machine epsilon where the type
    /// cannot resolve it.
    #[inline]
    fn floor_tol(tol: f64) -> f64 {
        tol.max(64.0 * Self::epsilon().as_f64())
    }
}

impl Real for f32 {
    fn epsilon() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn epsilon() -> Self {
        f64::EPSILON
    }
}

/// Dense `k×k` complex matrix.
pub type ComplexMatrix<T> = DMatrix<Complex<T>>;

/// Dense complex column vector.
pub type ComplexVector<T> = DVector<Complex<T>>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T) -> Complex<T> {
    Complex::new(re, T::zero())
}
