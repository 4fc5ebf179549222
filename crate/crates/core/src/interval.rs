//! Closed intervals with outward rounding.
//!
//! Every operation returns an enclosure of the exact real result. Rounding
//! is only widened when the floating result is inexact, detected with
//! error-free transformations, so exactly representable results stay tight.

use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::error::EvalError;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    lo: f64,
    hi: f64,
}

// Below this magnitude error-free transforms may themselves underflow.
const TINY: f64 = 1e-290;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

fn add_down(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return if s == f64::INFINITY && a.is_finite() && b.is_finite() {
            f64::MAX
        } else {
            s
        };
    }
    if e < 0.0 {
        s.next_down()
    } else {
        s
    }
}

fn add_up(a: f64, b: f64) -> f64 {
    let (s, e) = two_sum(a, b);
    if !s.is_finite() {
        return if s == f64::NEG_INFINITY && a.is_finite() && b.is_finite() {
            -f64::MAX
        } else {
            s
        };
    }
    if e > 0.0 {
        s.next_up()
    } else {
        s
    }
}

// 0 * inf is taken as 0, which is the correct limit for enclosures.
fn mul_dir(a: f64, b: f64, up: bool) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    let p = a * b;
    if !p.is_finite() {
        if a.is_finite() && b.is_finite() {
            return match (p > 0.0, up) {
                (true, false) => f64::MAX,
                (false, true) => -f64::MAX,
                _ => p,
            };
        }
        return p;
    }
    if p.abs() < TINY {
        return if up { p.next_up() } else { p.next_down() };
    }
    let e = libm::fma(a, b, -p);
    match (up, e) {
        (true, e) if e > 0.0 => p.next_up(),
        (false, e) if e < 0.0 => p.next_down(),
        _ => p,
    }
}

fn div_dir(a: f64, b: f64, up: bool) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    if b.is_infinite() {
        if a.is_infinite() {
            return if up { f64::INFINITY } else { f64::NEG_INFINITY };
        }
        return 0.0;
    }
    let q = a / b;
    if q.is_infinite() {
        if a.is_infinite() {
            return q;
        }
        return match (q > 0.0, up) {
            (true, false) => f64::MAX,
            (false, true) => -f64::MAX,
            _ => q,
        };
    }
    if q.abs() < TINY {
        return if up { q.next_up() } else { q.next_down() };
    }
    // a - q*b exactly; with the sign of b it tells on which side a/b lies.
    let r = libm::fma(-q, b, a);
    if r == 0.0 {
        return q;
    }
    let above = (r > 0.0) == (b > 0.0);
    match (up, above) {
        (true, true) => q.next_up(),
        (false, false) => q.next_down(),
        _ => q,
    }
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    /// Interval `[lo, hi]`. Panics if `lo > hi` or either bound is NaN.
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "invalid interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval::new(x, x)
    }

    /// Smallest interval containing both `a` and `b`, in either order.
    pub fn hull_of(a: f64, b: f64) -> Self {
        if a <= b {
            Interval::new(a, b)
        } else {
            Interval::new(b, a)
        }
    }

    /// One-ulp enclosure of a decimal literal that may not be representable.
    pub fn literal(v: f64) -> Self {
        if libm::trunc(v) == v && v.abs() <= 9007199254740992.0 {
            Interval::point(v)
        } else {
            Interval {
                lo: v.next_down(),
                hi: v.next_up(),
            }
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        if self.lo.is_finite() && self.hi.is_finite() {
            let m = 0.5 * self.lo + 0.5 * self.hi;
            m.clamp(self.lo, self.hi)
        } else if self.lo.is_finite() {
            self.lo
        } else if self.hi.is_finite() {
            self.hi
        } else {
            0.0
        }
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// True if `self` lies in the open interval `(lo, hi)`.
    pub fn inside_open(&self, lo: f64, hi: f64) -> bool {
        lo < self.lo && self.hi < hi
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        if lo <= hi {
            Some(Interval { lo, hi })
        } else {
            None
        }
    }

    pub fn split(&self) -> (Interval, Interval) {
        let m = self.mid();
        (
            Interval { lo: self.lo, hi: m },
            Interval { lo: m, hi: self.hi },
        )
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Sign of every point of the interval, if it is constant and nonzero.
    pub fn strict_sign(&self) -> Option<f64> {
        if self.lo > 0.0 {
            Some(1.0)
        } else if self.hi < 0.0 {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval {
                lo: 0.0,
                hi: self.mag(),
            }
        }
    }

    pub fn checked_div(self, rhs: Interval) -> Result<Interval, EvalError> {
        if rhs.contains(0.0) {
            return Err(EvalError::DivisionByZero);
        }
        let c = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in c {
            lo = lo.min(div_dir(a, b, false));
            hi = hi.max(div_dir(a, b, true));
        }
        Ok(Interval { lo, hi })
    }

    pub fn exp(self) -> Interval {
        let lo = if self.lo == 0.0 {
            1.0
        } else if self.lo == f64::NEG_INFINITY {
            0.0
        } else {
            libm::exp(self.lo).next_down().next_down().max(0.0)
        };
        let hi = if self.hi == 0.0 {
            1.0
        } else if self.hi == f64::INFINITY {
            f64::INFINITY
        } else {
            libm::exp(self.hi).next_up().next_up()
        };
        Interval { lo, hi }
    }

    pub fn ln(self) -> Result<Interval, EvalError> {
        if self.lo <= 0.0 {
            return Err(EvalError::NonPositiveLog);
        }
        let lo = if self.lo == 1.0 {
            0.0
        } else {
            libm::log(self.lo).next_down().next_down()
        };
        let hi = if self.hi == 1.0 {
            0.0
        } else if self.hi.is_infinite() {
            f64::INFINITY
        } else {
            libm::log(self.hi).next_up().next_up()
        };
        Ok(Interval { lo, hi })
    }

    pub fn sqrt(self) -> Interval {
        let lo = self.lo.max(0.0);
        let s_lo = libm::sqrt(lo);
        let s_hi = libm::sqrt(self.hi.max(0.0));
        let lo = if s_lo * s_lo == lo {
            s_lo
        } else {
            s_lo.next_down().max(0.0)
        };
        let hi = if s_hi * s_hi == self.hi {
            s_hi
        } else {
            s_hi.next_up()
        };
        Interval { lo, hi }
    }

    pub fn powi(self, n: u32) -> Interval {
        if n == 0 {
            return Interval::ONE;
        }
        if n == 1 {
            return self;
        }
        let pow_up = |a: f64| (1..n).fold(a, |acc, _| mul_dir(acc, a, true));
        let pow_down = |a: f64| (1..n).fold(a, |acc, _| mul_dir(acc, a, false));
        if n % 2 == 0 {
            let (a, b) = (self.mig(), self.mag());
            Interval {
                lo: pow_down(a),
                hi: pow_up(b),
            }
        } else {
            let lo = if self.lo >= 0.0 {
                pow_down(self.lo)
            } else {
                -pow_up(-self.lo)
            };
            let hi = if self.hi >= 0.0 {
                pow_up(self.hi)
            } else {
                -pow_down(-self.hi)
            };
            Interval { lo, hi }
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval {
            lo: add_down(self.lo, rhs.lo),
            hi: add_up(self.hi, rhs.hi),
        }
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self + (-rhs)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        if (self.lo == 0.0 && self.hi == 0.0) || (rhs.lo == 0.0 && rhs.hi == 0.0) {
            return Interval::ZERO;
        }
        let c = [
            (self.lo, rhs.lo),
            (self.lo, rhs.hi),
            (self.hi, rhs.lo),
            (self.hi, rhs.hi),
        ];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (a, b) in c {
            lo = lo.min(mul_dir(a, b, false));
            hi = hi.max(mul_dir(a, b, true));
        }
        Interval { lo, hi }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}
