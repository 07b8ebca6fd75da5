//! Scalar abstraction shared by every kernel in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// A relative tolerance that never drops below a few machine epsilons of
    /// the scalar type. For `f64` this returns `x` for every `x >= 1e-15`.
    #[inline]
    fn tol(x: f64) -> Self {
        let eps = Self::epsilon() * Self::lit(4.0);
        Self::lit(x).max(eps)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
