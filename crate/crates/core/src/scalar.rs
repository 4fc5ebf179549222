//! Number types that expressions and jets can be evaluated over.

use core::fmt::{self, Debug, Write};
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::EvalError;
use crate::interval::Interval;

pub trait Scalar:
    Copy + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// Exact conversion of a machine number.
    fn from_f64(v: f64) -> Self;
    /// Conversion of a literal constant. `exact` says whether the written
    /// decimal equals `v`; inexact literals are widened by interval types.
    fn literal(v: f64, exact: bool) -> Self;
    fn checked_div(self, rhs: Self) -> Result<Self, EvalError>;
    fn exp(self) -> Self;
    fn ln(self) -> Result<Self, EvalError>;
    fn powi(self, n: u32) -> Self;
    /// Sign of the value when it is certainly nonzero.
    fn strict_sign(self) -> Option<f64>;
    /// A representative machine number (the midpoint for intervals).
    fn approx(self) -> f64;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn literal(v: f64, _exact: bool) -> Self {
        v
    }

    fn checked_div(self, rhs: Self) -> Result<Self, EvalError> {
        if rhs == 0.0 {
            Err(EvalError::DivisionByZero)
        } else {
            Ok(self / rhs)
        }
    }

    fn exp(self) -> Self {
        libm::exp(self)
    }

    fn ln(self) -> Result<Self, EvalError> {
        if self > 0.0 {
            Ok(libm::log(self))
        } else {
            Err(EvalError::NonPositiveLog)
        }
    }

    fn powi(self, n: u32) -> Self {
        let mut acc = 1.0;
        let mut base = self;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base *= base;
            n >>= 1;
        }
        acc
    }

    fn strict_sign(self) -> Option<f64> {
        if self > 0.0 {
            Some(1.0)
        } else if self < 0.0 {
            Some(-1.0)
        } else {
            None
        }
    }

    fn approx(self) -> f64 {
        self
    }
}

impl Scalar for Interval {
    fn from_f64(v: f64) -> Self {
        Interval::point(v)
    }

    fn literal(v: f64, exact: bool) -> Self {
        if exact {
            Interval::point(v)
        } else {
            Interval::literal(v)
        }
    }

    fn checked_div(self, rhs: Self) -> Result<Self, EvalError> {
        Interval::checked_div(self, rhs)
    }

    fn exp(self) -> Self {
        Interval::exp(self)
    }

    fn ln(self) -> Result<Self, EvalError> {
        Interval::ln(self)
    }

    fn powi(self, n: u32) -> Self {
        Interval::powi(self, n)
    }

    fn strict_sign(self) -> Option<f64> {
        Interval::strict_sign(&self)
    }

    fn approx(self) -> f64 {
        self.mid()
    }
}

struct Buf {
    bytes: [u8; 400],
    len: usize,
}

impl Write for Buf {
    fn write_str(&mut self, s: &str) -> fmt::Result {
        let b = s.as_bytes();
        if self.len + b.len() > self.bytes.len() {
            return Err(fmt::Error);
        }
        self.bytes[self.len..self.len + b.len()].copy_from_slice(b);
        self.len += b.len();
        Ok(())
    }
}

/// Whether the shortest decimal rendering of `v` denotes `v` exactly.
///
/// Constants are printed in that rendering, so this is the exactness of the
/// literal a reader of the expression sees.
pub fn decimal_is_exact(v: f64) -> bool {
    if !v.is_finite() {
        return false;
    }
    if libm::trunc(v) == v && v.abs() <= 9007199254740992.0 {
        return true;
    }
    let mut buf = Buf {
        bytes: [0; 400],
        len: 0,
    };
    if write!(buf, "{}", v.abs()).is_err() {
        return false;
    }
    let text = &buf.bytes[..buf.len];
    let mut mantissa: u128 = 0;
    let mut frac_digits: i32 = 0;
    let mut seen_point = false;
    let mut digits = 0;
    for &c in text {
        match c {
            b'.' => seen_point = true,
            b'0'..=b'9' => {
                if mantissa > 0 || c != b'0' {
                    digits += 1;
                    if digits > 36 {
                        return false;
                    }
                }
                mantissa = mantissa * 10 + u128::from(c - b'0');
                if seen_point {
                    frac_digits += 1;
                }
            }
            _ => return false,
        }
    }
    if frac_digits > 55 {
        return false;
    }
    let five = 5u128.pow(frac_digits as u32);
    mantissa % five == 0 && mantissa / five < (1u128 << 53)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_decimals() {
        assert!(decimal_is_exact(0.125));
        assert!(decimal_is_exact(29.0));
        assert!(decimal_is_exact(0.90625));
        assert!(!decimal_is_exact(0.1));
        assert!(!decimal_is_exact(1.0 / 3.0));
        assert!(!decimal_is_exact(1e-300));
    }

    #[test]
    fn f64_powi_matches_repeated_product() {
        assert_eq!(Scalar::powi(1.5f64, 3), 1.5 * 1.5 * 1.5);
        assert_eq!(Scalar::powi(2.0f64, 0), 1.0);
    }
}
