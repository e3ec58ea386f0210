//! Scalar abstraction shared by the geometric and expression layers.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar used by cones, boxes, intervals and expression trees.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + Serialize + DeserializeOwned + 'static
{
    /// Converts an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Absolute tolerance for orthonormality and unit-norm checks.
    fn frame_tolerance() -> Self {
        Self::lit(1e-10).max(Self::epsilon() * Self::lit(256.0))
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Double-double, used by the finite-difference oracles.
impl Real for twofloat::TwoFloat {
    fn lit(v: f64) -> Self {
        Self::from(v)
    }
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub(crate) fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
