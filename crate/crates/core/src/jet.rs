//! Jets: derivative values `f(x), f'(x), ..., f^(K)(x)` at a base point.
//!
//! Products use the Leibniz rule and composition uses partial Bell
//! polynomials, both with integer coefficients, so the stored entries are
//! derivative values rather than Taylor coefficients throughout.

use core::ops::{Add, Mul, Neg, Sub};

use arrayvec::ArrayVec;

use crate::error::EvalError;
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 11;
const CAP: usize = MAX_ORDER + 1;

const fn binomials() -> [[f64; CAP]; CAP] {
    let mut t = [[0.0; CAP]; CAP];
    let mut n = 0;
    while n < CAP {
        t[n][0] = 1.0;
        let mut k = 1;
        while k <= n {
            t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0.0 };
            k += 1;
        }
        n += 1;
    }
    t
}

const BINOM: [[f64; CAP]; CAP] = binomials();

pub fn binomial(n: usize, k: usize) -> f64 {
    BINOM[n][k]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet<T> {
    d: ArrayVec<T, CAP>,
}

fn check_order(order: usize) -> Result<(), EvalError> {
    if order > MAX_ORDER {
        Err(EvalError::OrderTooHigh(order))
    } else {
        Ok(())
    }
}

impl<T: Scalar> Jet<T> {
    /// Jet of the identity map at `x`.
    pub fn variable(x: T, order: usize) -> Result<Self, EvalError> {
        check_order(order)?;
        let mut d = ArrayVec::new();
        d.push(x);
        for k in 1..=order {
            d.push(if k == 1 { T::one() } else { T::zero() });
        }
        Ok(Jet { d })
    }

    pub fn constant(c: T, order: usize) -> Result<Self, EvalError> {
        check_order(order)?;
        let mut d = ArrayVec::new();
        d.push(c);
        for _ in 0..order {
            d.push(T::zero());
        }
        Ok(Jet { d })
    }

    pub fn from_derivatives(values: &[T]) -> Result<Self, EvalError> {
        if values.is_empty() {
            return Err(EvalError::OrderTooHigh(0));
        }
        check_order(values.len() - 1)?;
        Ok(Jet {
            d: values.iter().copied().collect(),
        })
    }

    pub fn order(&self) -> usize {
        self.d.len() - 1
    }

    pub fn value(&self) -> T {
        self.d[0]
    }

    /// The `k`-th derivative value.
    pub fn derivative(&self, k: usize) -> T {
        self.d[k]
    }

    pub fn derivatives(&self) -> &[T] {
        &self.d
    }

    pub fn truncate(&self, order: usize) -> Self {
        Jet {
            d: self.d.iter().take(order + 1).copied().collect(),
        }
    }

    /// Jet of the derivative function, one order lower.
    pub fn shift(&self) -> Self {
        assert!(self.order() >= 1, "cannot differentiate a jet of order 0");
        Jet {
            d: self.d.iter().skip(1).copied().collect(),
        }
    }

    pub fn scale(&self, c: T) -> Self {
        Jet {
            d: self.d.iter().map(|&v| v * c).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Jet {
            d: self
                .d
                .iter()
                .zip(other.d.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn product(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut d = ArrayVec::new();
        for k in 0..=n {
            let mut s = T::zero();
            for j in 0..=k {
                s = s + T::from_f64(BINOM[k][j]) * self.d[j] * other.d[k - j];
            }
            d.push(s);
        }
        Jet { d }
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, EvalError> {
        let n = self.order().min(other.order());
        let g0 = other.d[0];
        let mut h: ArrayVec<T, CAP> = ArrayVec::new();
        for k in 0..=n {
            let mut s = self.d[k];
            for j in 0..k {
                s = s - T::from_f64(BINOM[k][j]) * h[j] * other.d[k - j];
            }
            h.push(s.checked_div(g0)?);
        }
        Ok(Jet { d: h })
    }

    /// Chain rule: `outer` holds derivative values of the outer function at
    /// `inner.value()`; the result is the jet of the composition.
    pub fn compose(outer: &[T], inner: &Self) -> Self {
        let n = inner.order().min(outer.len() - 1);
        // bell[k][m] = B_{k,m}(u_1, ..., u_{k-m+1})
        let mut bell = [[T::zero(); CAP]; CAP];
        bell[0][0] = T::one();
        for k in 1..=n {
            for m in 1..=k {
                let mut s = T::zero();
                for i in 1..=(k - m + 1) {
                    s = s + T::from_f64(BINOM[k - 1][i - 1]) * inner.d[i] * bell[k - i][m - 1];
                }
                bell[k][m] = s;
            }
        }
        let mut d = ArrayVec::new();
        d.push(outer[0]);
        for row in bell.iter().take(n + 1).skip(1) {
            let mut s = T::zero();
            for (m, &b) in row.iter().enumerate().skip(1) {
                if m < outer.len() {
                    s = s + outer[m] * b;
                }
            }
            d.push(s);
        }
        Jet { d }
    }

    pub fn exp(&self) -> Self {
        let e = self.d[0].exp();
        let outer = [e; CAP];
        Self::compose(&outer[..=self.order()], self)
    }

    pub fn ln(&self) -> Result<Self, EvalError> {
        let u = self.d[0];
        let mut outer: ArrayVec<T, CAP> = ArrayVec::new();
        outer.push(u.ln()?);
        let mut fact = 1.0;
        for m in 1..=self.order() {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            outer.push(T::from_f64(sign * fact).checked_div(u.powi(m as u32))?);
            fact *= m as f64;
        }
        Ok(Self::compose(&outer, self))
    }

    pub fn powi(&self, n: u32) -> Self {
        let u = self.d[0];
        let mut outer: ArrayVec<T, CAP> = ArrayVec::new();
        let mut falling = 1.0;
        for m in 0..=self.order() {
            if m as u32 > n {
                outer.push(T::zero());
            } else {
                outer.push(T::from_f64(falling) * u.powi(n - m as u32));
                falling *= f64::from(n - m as u32);
            }
        }
        Self::compose(&outer, self)
    }

    /// Jet of `|f|` when the value has a certified fixed sign.
    pub fn abs(&self) -> Result<Self, EvalError> {
        match self.d[0].strict_sign() {
            Some(s) if s > 0.0 => Ok(self.clone()),
            Some(_) => Ok(-self.clone()),
            None => Err(EvalError::NonPositiveLog),
        }
    }

    /// Jet of the inverse function at `self.value()`, given that this jet
    /// belongs to an invertible map at the base point `x0`.
    pub fn inverse_function(&self, x0: T) -> Result<Self, EvalError> {
        let n = self.order();
        let f1 = self.d[1];
        if f1.strict_sign().is_none() {
            return Err(EvalError::DivisionByZero);
        }
        let mut g: ArrayVec<T, CAP> = ArrayVec::new();
        g.push(x0);
        g.push(T::one().checked_div(f1)?);
        for k in 2..=n {
            g.push(T::zero());
            let partial = Self::compose(&self.d[..=k], &Jet { d: g.clone() });
            g[k] = (-partial.d[k]).checked_div(f1)?;
        }
        Ok(Jet { d: g })
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Jet<T>) -> Jet<T> {
        self.product(&rhs)
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet {
            d: self.d.into_iter().map(|v| -v).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn var(x: f64, k: usize) -> Jet<f64> {
        Jet::variable(x, k).unwrap()
    }

    #[test]
    fn exp_of_variable_at_zero() {
        assert_eq!(var(0.0, 3).exp().derivatives(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn leibniz_for_cube() {
        let x = var(2.0, 4);
        let c = x.clone() * x.clone() * x;
        assert_eq!(c.derivatives(), &[8.0, 12.0, 12.0, 6.0, 0.0]);
    }

    #[test]
    fn powi_matches_product() {
        let x = var(0.7, 5).exp();
        let a = x.powi(3);
        let b = x.clone() * x.clone() * x;
        for k in 0..=5 {
            assert_relative_eq!(a.derivative(k), b.derivative(k), max_relative = 1e-14);
        }
    }

    #[test]
    fn quotient_undoes_product() {
        let x = var(0.3, 6);
        let f = x.exp() + x.powi(2);
        let g = x.powi(3) + Jet::constant(2.0, 6).unwrap();
        let q = (f.clone() * g.clone()).checked_div(&g).unwrap();
        for k in 0..=6 {
            assert_relative_eq!(q.derivative(k), f.derivative(k), max_relative = 1e-12);
        }
    }

    #[test]
    fn ln_of_exp_is_identity() {
        let x = var(0.4, 6);
        let back = x.exp().ln().unwrap();
        assert_relative_eq!(back.value(), 0.4, max_relative = 1e-15);
        assert_relative_eq!(back.derivative(1), 1.0, max_relative = 1e-14);
        for k in 2..=6 {
            assert!(back.derivative(k).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_exp_is_log() {
        // exp at x0 = 0.5; inverse ln at y0 = e^0.5 has derivatives (-1)^(k-1)(k-1)!/y^k.
        let j = var(0.5, 5).exp();
        let inv = j.inverse_function(0.5).unwrap();
        let y = libm::exp(0.5);
        assert_relative_eq!(inv.derivative(1), 1.0 / y, max_relative = 1e-14);
        assert_relative_eq!(inv.derivative(2), -1.0 / (y * y), max_relative = 1e-13);
        assert_relative_eq!(inv.derivative(5), 24.0 / y.powi(5), max_relative = 1e-12);
    }

    #[test]
    fn order_cap() {
        assert_eq!(
            Jet::<f64>::variable(0.0, MAX_ORDER + 1),
            Err(EvalError::OrderTooHigh(MAX_ORDER + 1))
        );
    }
}
