//! Scalar abstraction for the numeric scoring code.
//!
//! Readability, cohesion and structural similarity are computed for any
//! floating type; the crate root exposes `f64` aliases for everyday use.

use num_traits::{Float, FromPrimitive};

/// Floating scalar usable by the metric kernels: `f32` or `f64`.
pub trait Scalar: Float + FromPrimitive + std::fmt::Debug + Send + Sync + 'static {
    /// Lossless-enough conversion from a literal constant.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Conversion from a count.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in a float")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Ratio `num / den`, fixed at zero when the denominator is zero.
pub fn ratio_or_zero<T: Scalar>(num: usize, den: usize) -> T {
    if den == 0 {
        T::zero()
    } else {
        T::count(num) / T::count(den)
    }
}

/// Clamps into `[lo, hi]`. NaN maps to `lo`.
pub fn clamp<T: Scalar>(v: T, lo: T, hi: T) -> T {
    if v.is_nan() || v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}
