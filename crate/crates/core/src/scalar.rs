//! Floating-point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign};

/// Real scalar the estimators and solvers are generic over.
///
/// Implemented for `f32` and `f64`. Constants are written as `f64` literals
/// and converted with [`Scalar::lit`].
pub trait Scalar:
    Float + FromPrimitive + NumAssign + Sum + ScalarOperand + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly rounded)
    /// in the supported types, so this never fails.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal converts to scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lower clamp applied to probabilities and densities before `ln` and fractional powers.
pub const EPS_FLOOR: f64 = 1e-12;

#[inline]
pub(crate) fn floor<T: Scalar>(v: T) -> T {
    let eps = T::lit(EPS_FLOOR);
    if v < eps {
        eps
    } else {
        v
    }
}
