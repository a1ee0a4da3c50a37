//! Scalar abstraction so the numeric pipeline runs in f32 or f64.

use std::fmt::{Debug, Display};

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar used for features, model parameters and
/// normalization coefficients.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssignOps + ScalarOperand + Display + Debug + Send + Sync + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }

    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize conversion")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("f64 widening")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
