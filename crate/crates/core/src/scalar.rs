//! Floating point abstraction shared by the balance-sheet and cascade code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used for currency amounts and ratios.
///
/// Implemented for `f32` and `f64`. Everything in the balance-sheet model is
/// homogeneous of degree one in the total external asset, so single precision
/// is usable for quick sweeps, while `f64` is the default everywhere else.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; every configuration value enters through here.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("usize is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `base^exp` with the convention `0^0 = 1`.
    fn pow_or_one(base: Self, exp: Self) -> Self {
        if exp == Self::zero() {
            Self::one()
        } else {
            base.powf(exp)
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative difference `|a - b| / max(|a|, |b|, tiny)`.
pub fn rel_diff<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs()).max(T::min_positive_value());
    (a - b).abs() / scale
}
