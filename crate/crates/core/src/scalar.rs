//! Scalar abstraction for all cost, weight, and time arithmetic.

use std::fmt;

/// Floating-point scalar used for affinity weights, costs, and times.
///
/// Counting quantities (trip counts, byte sizes, record counts) stay
/// integral throughout; everything that is a rate or a duration is `T`.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Lossy conversion from a count. Saturates at the float limit.
    fn from_count(value: u64) -> Self {
        Self::from_u64(value).unwrap_or_else(Self::max_value)
    }
}

impl<T> Scalar for T where
    T: num_traits::Float
        + num_traits::FromPrimitive
        + fmt::Debug
        + fmt::Display
        + Send
        + Sync
        + 'static
{
}
