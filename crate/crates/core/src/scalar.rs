//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real floating point scalar: implemented for `f32` and `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, rounding to the nearest representable value.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// `requested` widened so that it is attainable at magnitude `scale`.
    #[inline]
    fn attainable_tol(requested: f64, scale: Self) -> Self {
        let floor = Self::epsilon() * Self::lit(16.0) * (Self::one() + scale.abs());
        Self::lit(requested).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Reduces `x` into `[0, 1)`.
#[inline]
pub fn wrap01<T: Scalar>(x: T) -> T {
    let r = x - x.floor();
    // x slightly below an integer can round to exactly 1
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// Distance on the circle `R/Z`.
#[inline]
pub fn circle_dist<T: Scalar>(a: T, b: T) -> T {
    let d = wrap01(a - b);
    d.min(T::one() - d)
}

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated<T> {
    sum: T,
    carry: T,
}

impl<T: Scalar> Compensated<T> {
    pub fn new(init: T) -> Self {
        Self { sum: init, carry: T::zero() }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Compensated sum of an iterator.
pub fn kahan_sum<T: Scalar, I: IntoIterator<Item = T>>(it: I) -> T {
    let mut acc = Compensated::new(T::zero());
    for x in it {
        acc.add(x);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_distance() {
        assert_eq!(wrap01(1.25_f64), 0.25);
        assert_eq!(wrap01(-0.25_f64), 0.75);
        assert!(wrap01(-1e-20_f64) < 1.0);
        assert!((circle_dist(0.95_f64, 0.05) - 0.1).abs() < 1e-15);
        assert!((circle_dist(0.2_f32, 0.7) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn compensated_beats_naive() {
        let xs = std::iter::once(1.0_f64).chain(std::iter::repeat_n(1e-16, 10_000));
        let s = kahan_sum(xs);
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }
}
