//! Double-double arithmetic (about 32 significant digits).
//!
//! Used as a high-precision reference scalar, mainly so finite-difference
//! oracles for high derivatives are not swamped by cancellation.

use core::ops::{Add, Mul, Neg, Sub};

use crate::error::EvalError;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

const LN2: DoubleDouble = DoubleDouble {
    hi: core::f64::consts::LN_2,
    lo: 2.319_046_813_846_3e-17,
};

impl DoubleDouble {
    pub fn new(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn from_parts(a: f64, b: f64) -> Self {
        let (hi, lo) = quick_two_sum(a, b);
        DoubleDouble { hi, lo }
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        Self::from_parts(p, e + self.lo * b)
    }

    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        Self::from_parts(q1, q2) + DoubleDouble::new(q3)
    }

    fn ldexp(self, e: i32) -> Self {
        DoubleDouble {
            hi: libm::ldexp(self.hi, e),
            lo: libm::ldexp(self.lo, e),
        }
    }

    fn exp_dd(self) -> Self {
        if self.hi > 709.0 {
            return DoubleDouble::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return DoubleDouble::new(0.0);
        }
        let k = libm::round(self.hi / LN2.hi);
        let r = self - LN2.mul_f64(k);
        // exp(r) = exp(r / 16)^16; the small argument keeps the series short.
        let s = r.ldexp(-4);
        let mut term = DoubleDouble::new(1.0);
        let mut sum = DoubleDouble::new(1.0);
        for i in 1..=24 {
            term = (term * s).div(DoubleDouble::new(i as f64));
            sum = sum + term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        for _ in 0..4 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        Self::from_parts(s, e + f)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::from_parts(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Scalar for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        DoubleDouble::new(v)
    }

    fn literal(v: f64, _exact: bool) -> Self {
        DoubleDouble::new(v)
    }

    fn checked_div(self, rhs: Self) -> Result<Self, EvalError> {
        if rhs.hi == 0.0 {
            Err(EvalError::DivisionByZero)
        } else {
            Ok(self.div(rhs))
        }
    }

    fn exp(self) -> Self {
        self.exp_dd()
    }

    fn ln(self) -> Result<Self, EvalError> {
        if self.hi <= 0.0 {
            return Err(EvalError::NonPositiveLog);
        }
        // Two Newton steps on exp(y) = x from the double estimate.
        let mut y = DoubleDouble::new(libm::log(self.hi));
        for _ in 0..2 {
            y = y + (self * (-y).exp_dd()) - DoubleDouble::new(1.0);
        }
        Ok(y)
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = DoubleDouble::new(1.0);
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    fn strict_sign(self) -> Option<f64> {
        self.hi.strict_sign()
    }

    fn approx(self) -> f64 {
        self.to_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn third_times_three_is_one_to_double_double_precision() {
        let t = DoubleDouble::new(1.0).div(DoubleDouble::new(3.0));
        let r = t * DoubleDouble::new(3.0) - DoubleDouble::new(1.0);
        assert!(r.to_f64().abs() < 1e-31);
    }

    #[test]
    fn exp_and_ln_are_inverse() {
        let x = DoubleDouble::new(0.7);
        let back = x.exp().ln().unwrap() - x;
        assert!(back.to_f64().abs() < 1e-30);
        let e = DoubleDouble::new(1.0).exp();
        assert!((e.hi - core::f64::consts::E).abs() <= f64::EPSILON * 3.0);
    }
}
