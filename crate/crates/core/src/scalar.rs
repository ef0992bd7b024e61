//! Scalar abstraction for embedding coordinates.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable for embedding storage and distance computation.
///
/// Implemented for `f32` and `f64`. Calibration and noise generation always
/// run in `f64`; values are converted at the boundary.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + FromStr
    + Display
    + LowerExp
    + Debug
    + Default
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Parses a coordinate field from an embedding file.
    fn parse_field(s: &str) -> Option<Self> {
        s.parse().ok()
    }

    /// Lossy conversion from `f64`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance. Four independent accumulators so the loop
/// vectorises; the summation order is fixed, so results are reproducible.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let base = c * 4;
        for k in 0..4 {
            let diff = a[base + k] - b[base + k];
            acc[k] = acc[k] + diff * diff;
        }
    }
    let mut tail = T::zero();
    for k in chunks * 4..a.len() {
        let diff = a[k] - b[k];
        tail = tail + diff * diff;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> T {
    squared_distance(a, b).sqrt()
}

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
