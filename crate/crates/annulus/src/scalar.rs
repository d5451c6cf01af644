//! Scalar abstraction shared by the geometry and Green's-function kernels.

/// Floating point scalar usable by the generic kernels (`f32` or `f64`).
pub trait Real:
    num_traits::Float + num_traits::FromPrimitive + num_traits::FloatConst + core::fmt::Debug + Send + Sync + 'static
{
    /// Lossy conversion from `f64` literals.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }
    /// Lossy conversion to `f64`.
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
