//! Second-order forward-mode jets.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::scalar::Scalar;

/// A value together with its first and second derivative along one variable.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
}

impl<T: Scalar> Jet2<T> {
    pub fn new(value: T, d1: T, d2: T) -> Self {
        Self { value, d1, d2 }
    }

    /// The independent variable seeded at `x`.
    pub fn variable(x: T) -> Self {
        Self::new(x, T::one(), T::zero())
    }

    pub fn constant(c: T) -> Self {
        Self::new(c, T::zero(), T::zero())
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    /// Applies a scalar function `g` with `g(u) = g0`, `g'(u) = g1`, `g''(u) = g2`.
    #[inline]
    pub fn chain(self, g0: T, g1: T, g2: T) -> Self {
        Self::new(g0, g1 * self.d1, g2 * self.d1 * self.d1 + g1 * self.d2)
    }

    /// Composes `outer` (a jet of some function at `self.value`) with `self`.
    #[inline]
    pub fn compose(self, outer: Jet2<T>) -> Self {
        self.chain(outer.value, outer.d1, outer.d2)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    /// Natural logarithm; the caller guarantees `value > 0`.
    pub fn ln(self) -> Self {
        let inv = self.value.recip();
        self.chain(self.value.ln(), inv, -inv * inv)
    }

    /// `self^k` for a constant exponent.
    pub fn powf(self, k: T) -> Self {
        let u = self.value;
        if k == T::zero() {
            return Self::constant(T::one());
        }
        if k == T::one() {
            return self;
        }
        let two = T::lit(2.0);
        let g0 = u.powf(k);
        let g1 = k * u.powf(k - T::one());
        // k(k-1) vanishes for k = 1 (handled above); guard 0 * inf for k = 2 at u = 0
        let g2 = if k == two { two } else { k * (k - T::one()) * u.powf(k - two) };
        self.chain(g0, g1, g2)
    }

    /// `self^other` with both sides varying; the caller guarantees `self.value > 0`.
    pub fn pow(self, other: Self) -> Self {
        (other * self.ln()).exp()
    }

    pub fn recip(self) -> Self {
        let inv = self.value.recip();
        self.chain(inv, -inv * inv, T::lit(2.0) * inv * inv * inv)
    }
}

impl<T: Scalar> Add for Jet2<T> {
    type Output = Self;
    fn add(self, r: Self) -> Self {
        Self::new(self.value + r.value, self.d1 + r.d1, self.d2 + r.d2)
    }
}

impl<T: Scalar> Sub for Jet2<T> {
    type Output = Self;
    fn sub(self, r: Self) -> Self {
        Self::new(self.value - r.value, self.d1 - r.d1, self.d2 - r.d2)
    }
}

impl<T: Scalar> Mul for Jet2<T> {
    type Output = Self;
    fn mul(self, r: Self) -> Self {
        Self::new(
            self.value * r.value,
            self.d1 * r.value + self.value * r.d1,
            self.d2 * r.value + T::lit(2.0) * self.d1 * r.d1 + self.value * r.d2,
        )
    }
}

impl<T: Scalar> Div for Jet2<T> {
    type Output = Self;
    fn div(self, r: Self) -> Self {
        self * r.recip()
    }
}

impl<T: Scalar> Neg for Jet2<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2)
    }
}

impl<T: Scalar> Mul<T> for Jet2<T> {
    type Output = Self;
    fn mul(self, c: T) -> Self {
        Self::new(self.value * c, self.d1 * c, self.d2 * c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_rule_second_order() {
        // (x^2 sin x)'' = 2 sin x + 4x cos x - x^2 sin x
        let x = Jet2::variable(0.7_f64);
        let y = x * x * x.sin();
        let v = 0.7_f64;
        assert!(close(y.d2, 2.0 * v.sin() + 4.0 * v * v.cos() - v * v * v.sin(), 1e-14));
    }

    #[test]
    fn quotient_and_log() {
        let x = Jet2::variable(1.3_f64);
        let y = x.ln() / x;
        // (ln x / x)' = (1 - ln x)/x^2, '' = (2 ln x - 3)/x^3
        let v = 1.3_f64;
        assert!(close(y.d1, (1.0 - v.ln()) / (v * v), 1e-14));
        assert!(close(y.d2, (2.0 * v.ln() - 3.0) / (v * v * v), 1e-14));
    }

    #[test]
    fn power_of_zero_base() {
        let x = Jet2::variable(0.0_f64);
        let y = x.powf(2.0);
        assert_eq!((y.value, y.d1, y.d2), (0.0, 0.0, 2.0));
        let z = x.powf(3.0);
        assert_eq!((z.value, z.d1, z.d2), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_precision_jets() {
        let x = Jet2::variable(0.5_f32);
        let y = (x * 2.0 * std::f32::consts::PI).sin();
        assert!((y.d1 + 2.0 * std::f32::consts::PI).abs() < 1e-4);
    }
}
