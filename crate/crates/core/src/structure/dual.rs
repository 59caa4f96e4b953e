//! Forward-mode dual numbers, nestable for higher directional derivatives.
//!
//! Frame fields of non-left-invariant models are written once against the
//! [`Scalar`] trait; evaluating them on `Dual<Dual<..>>` arguments yields the
//! frame-directional derivatives of the structure functions.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Send
    + Sync
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn cst(v: f64) -> Self;
    fn sqrt(self) -> Self;
    /// Real part at the bottom of the nesting.
    fn re(self) -> f64;

    fn zero() -> Self {
        Self::cst(0.0)
    }

    fn scale(self, s: f64) -> Self {
        self * Self::cst(s)
    }
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn re(self) -> f64 {
        self
    }
}

/// `v + e·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual<T> {
    pub v: T,
    pub e: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(v: T, e: T) -> Self {
        Self { v, e }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.v + o.v, self.e + o.e)
    }
}

impl<T: Scalar> AddAssign for Dual<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.v - o.v, self.e - o.e)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.v * o.v, self.v * o.e + self.e * o.v)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.v / o.v;
        Self::new(q, (self.e - q * o.e) / o.v)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.v, -self.e)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    fn cst(v: f64) -> Self {
        Self::new(T::cst(v), T::cst(0.0))
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        Self::new(s, self.e / (s + s))
    }
    fn re(self) -> f64 {
        self.v.re()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D2 = Dual<Dual<f64>>;

    fn f<S: Scalar>(x: S) -> S {
        (x * x + S::cst(1.0)).sqrt() / (x + S::cst(2.0))
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let x = 0.7;
        let d = f(Dual::new(x, 1.0)).e;
        let h = 1e-6;
        let fd = (f(x + h) - f(x - h)) / (2.0 * h);
        assert!((d - fd).abs() < 1e-9);
    }

    #[test]
    fn nested_duals_give_second_derivative() {
        let x = 0.3;
        let arg: D2 = Dual::new(Dual::new(x, 1.0), Dual::new(1.0, 0.0));
        let second = f(arg).e.e;
        let h = 1e-4;
        let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        assert!((second - fd).abs() < 1e-6);
    }
}
