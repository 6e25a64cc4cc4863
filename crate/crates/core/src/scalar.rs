//! Scalar abstraction for the whole crate.
//!
//! Everything numeric is generic over [`Real`], a floating-point scalar
//! backed by `num-traits`. Both `f32` and `f64` satisfy the bound; the
//! concrete aliases at the crate root fix `f64`, which is the precision all
//! file formats and default tolerances assume.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by every module in this crate.
pub trait Real: Float + FromPrimitive + NumAssign + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion to `f64`, used by printing and diagnostics.
    fn to_f64_lossy(self) -> f64;
}

impl Real for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

/// Shorthand for embedding an `f64` literal into a generic scalar.
///
/// Exact for every literal this crate uses when `T = f64`; for `f32` the
/// usual rounding applies.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}
