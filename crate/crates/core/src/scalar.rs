//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the detector is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`. Panics only for non-representable values,
    /// which cannot happen for the finite constants used in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits scalar")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Total order usable for sorting; NaN sorts last.
    #[inline]
    fn total_cmp_s(&self, other: &Self) -> std::cmp::Ordering {
        self.as_f64().total_cmp(&other.as_f64())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Neumaier-compensated running sum.
///
/// Adding a value and later subtracting the identical value leaves the sum
/// unchanged up to O(eps^2) of the absolute mass, which keeps incrementally
/// maintained aggregates in step with a from-scratch evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn sub(&mut self, x: T) {
        self.add(-x);
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }

    pub fn reset(&mut self) {
        self.sum = T::zero();
        self.comp = T::zero();
    }
}

impl<T: Scalar> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Relative difference `|a - b| / max(|a|, |b|)`, zero when both are zero.
pub fn relative_diff<T: Scalar>(a: T, b: T) -> T {
    let scale = a.abs().max(b.abs());
    if scale == T::zero() {
        T::zero()
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_cancels_exactly_added_terms() {
        let xs = [1e16, 3.0, -2.5, 1e-3, 7.25e8];
        let mut s = CompensatedSum::<f64>::new();
        for &x in &xs {
            s.add(x);
        }
        s.add(0.125);
        for &x in xs.iter().rev() {
            s.sub(x);
        }
        assert_eq!(s.value(), 0.125);
    }

    #[test]
    fn compensated_sum_beats_naive_on_mixed_magnitudes() {
        let mut s = CompensatedSum::<f64>::new();
        let mut naive = 0.0f64;
        for _ in 0..10_000 {
            s.add(0.1);
            naive += 0.1;
        }
        assert!((s.value() - 1000.0).abs() <= (naive - 1000.0).abs());
        assert!((s.value() - 1000.0).abs() < 1e-10);
    }

    #[test]
    fn relative_diff_handles_zero() {
        assert_eq!(relative_diff(0.0f64, 0.0), 0.0);
        assert_eq!(relative_diff(1.0f64, 0.5), 0.5);
    }

    #[test]
    fn f32_is_a_scalar() {
        let x: f32 = Scalar::lit(0.5);
        assert_eq!(x, 0.5f32);
        assert_eq!(<f32 as Scalar>::from_count(3), 3.0);
    }
}
