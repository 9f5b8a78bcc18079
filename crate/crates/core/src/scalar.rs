use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point scalar the geometric and statistical code is generic over.
///
/// Exact fade-state arithmetic never goes through this trait; it lives in
/// [`crate::gaussian`] on 64-bit integers.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Tolerance used when grouping floating-point points that should coincide
    /// exactly (PSK fade states, PSK singularity classes).
    fn merge_tolerance() -> Self {
        Self::epsilon().powf(Self::from_f64(0.75).unwrap())
    }

    /// Lossy conversion from `f64`; every value used here is representable.
    fn of(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
