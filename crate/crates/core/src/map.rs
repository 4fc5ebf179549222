//! Analytic maps of the interval and their validation.

use alloc::format;
use alloc::string::String;

use crate::enclose::{enclose_with, EncloseConfig, Enclosure};
use crate::error::{Error, EvalError};
use crate::expr::{parse_expr, Expr, Tape};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 0.05;

/// Slack allowed when checking `f([0,1]) ⊆ [0,1]`. Maps such as
/// `x/3 + 2/3` touch the boundary exactly, which outward-rounded
/// enclosures of inexact literals cannot confirm.
pub const INVARIANCE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct AnalyticMap {
    expr: Expr,
    tape: Tape,
    epsilon: f64,
    derivative: Enclosure,
    ratio: Option<Enclosure>,
}

/// Parse `source` and check that every denominator stays away from zero on
/// `[-epsilon, 1 + epsilon]`.
pub fn parse_map(source: &str, epsilon: f64) -> Result<AnalyticMap, Error> {
    AnalyticMap::new(parse_expr(source)?, epsilon)
}

fn has_var(e: &Expr) -> bool {
    match e {
        Expr::Var => true,
        Expr::Const(_) => false,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            has_var(a) || has_var(b)
        }
        Expr::IntPow(a, _) | Expr::Exp(a) | Expr::Neg(a) => has_var(a),
    }
}

impl AnalyticMap {
    pub fn new(expr: Expr, epsilon: f64) -> Result<Self, Error> {
        Self::with_config(expr, epsilon, &EncloseConfig::default())
    }

    pub fn with_config(expr: Expr, epsilon: f64, cfg: &EncloseConfig) -> Result<Self, Error> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        let ext = Interval::new(-epsilon, 1.0 + epsilon);
        for d in expr.denominators() {
            let vanishes = if has_var(d) {
                let t = Tape::compile(d);
                match enclose_with(ext, 0, cfg, |j| t.eval_jet(j)) {
                    Ok(enc) => enc.range.contains(0.0),
                    Err(_) => true,
                }
            } else {
                d.eval(Interval::ZERO)
                    .map(|v| v.contains(0.0))
                    .unwrap_or(true)
            };
            if vanishes {
                return Err(Error::Domain(format!(
                    "denominator `{d}` may vanish on [{}, {}]",
                    -epsilon,
                    1.0 + epsilon
                )));
            }
        }
        let tape = Tape::compile(&expr);
        let unit = Interval::new(0.0, 1.0);
        let derivative = enclose_with(unit, 1, cfg, |j| tape.eval_jet(j))?;
        let ratio = if derivative.range.strict_sign().is_some() {
            Some(enclose_ratio(&tape, unit, cfg)?)
        } else {
            None
        };
        Ok(AnalyticMap {
            expr,
            tape,
            epsilon,
            derivative,
            ratio,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Cached enclosure of `f'` on `[0, 1]`.
    pub fn derivative_bounds(&self) -> &Enclosure {
        &self.derivative
    }

    /// Cached enclosure of `f''/f'` on `[0, 1]`, when `f'` has a fixed sign.
    pub fn ratio_bounds(&self) -> Option<&Enclosure> {
        self.ratio.as_ref()
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.tape.eval(x)
    }

    pub fn eval_scalar<T: Scalar>(&self, x: T) -> Result<T, EvalError> {
        self.tape.eval(x)
    }

    /// Derivative values `f(x), ..., f^(order)(x)`.
    pub fn eval_jet(&self, x: f64, order: usize) -> Result<Jet<f64>, EvalError> {
        self.tape.eval_jet(&Jet::variable(x, order)?)
    }

    /// Jet of `f ∘ inner`.
    pub fn jet<T: Scalar>(&self, inner: &Jet<T>) -> Result<Jet<T>, EvalError> {
        self.tape.eval_jet(inner)
    }

    pub fn enclose(&self, domain: Interval, k: usize) -> Result<Enclosure, EvalError> {
        self.enclose_with_config(domain, k, &EncloseConfig::default())
    }

    pub fn enclose_with_config(
        &self,
        domain: Interval,
        k: usize,
        cfg: &EncloseConfig,
    ) -> Result<Enclosure, EvalError> {
        enclose_with(domain, k, cfg, |j| self.tape.eval_jet(j))
    }

    /// Enclosure of `f''/f'` on `domain`.
    pub fn enclose_ratio(
        &self,
        domain: Interval,
        cfg: &EncloseConfig,
    ) -> Result<Enclosure, EvalError> {
        enclose_ratio(&self.tape, domain, cfg)
    }

    /// Enclosure of the `k`-th derivative of `log |f'|` on `domain`.
    pub fn enclose_log_derivative(
        &self,
        domain: Interval,
        k: usize,
        cfg: &EncloseConfig,
    ) -> Result<Enclosure, EvalError> {
        enclose_with(domain, k, cfg, |v| {
            let w = Jet::variable(v.value(), v.order() + 1)?;
            self.tape.eval_jet(&w)?.shift().abs()?.ln()
        })
    }
}

fn enclose_ratio(
    tape: &Tape,
    domain: Interval,
    cfg: &EncloseConfig,
) -> Result<Enclosure, EvalError> {
    enclose_with(domain, 0, cfg, |v| {
        let r = v.order();
        let w = Jet::variable(v.value(), r + 2)?;
        let f1 = tape.eval_jet(&w)?.shift();
        f1.shift().checked_div(&f1.truncate(r))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize),
    serde(rename_all = "SCREAMING_SNAKE_CASE")
)]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PropertyCheck {
    pub status: CheckStatus,
    pub requirement: String,
    pub domain: Interval,
    /// Certifying enclosure, absent when evaluation failed.
    pub enclosure: Option<Interval>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ValidationReport {
    pub invariance: PropertyCheck,
    pub extended_invariance: PropertyCheck,
    pub contraction: PropertyCheck,
    /// Complex analyticity on a strip is not checked.
    pub analyticity: &'static str,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        [
            &self.invariance,
            &self.extended_invariance,
            &self.contraction,
        ]
        .iter()
        .all(|c| c.status == CheckStatus::Pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyCheck> {
        [
            &self.invariance,
            &self.extended_invariance,
            &self.contraction,
        ]
        .into_iter()
        .filter(|c| c.status != CheckStatus::Pass)
    }
}

fn judge(
    requirement: String,
    domain: Interval,
    enc: Result<Enclosure, EvalError>,
    inside: impl Fn(&Interval) -> bool,
) -> PropertyCheck {
    match enc {
        Err(e) => PropertyCheck {
            status: CheckStatus::Fail,
            requirement,
            domain,
            enclosure: None,
            detail: format!("evaluation failed: {e}"),
        },
        Ok(enc) => {
            let status = if inside(&enc.range) {
                CheckStatus::Pass
            } else if !inside(&enc.sampled) {
                CheckStatus::Fail
            } else {
                CheckStatus::Inconclusive
            };
            let detail = match status {
                CheckStatus::Pass => format!("enclosure {} satisfies the requirement", enc.range),
                CheckStatus::Fail => {
                    format!("attained values {} violate the requirement", enc.sampled)
                }
                CheckStatus::Inconclusive => format!("enclosure {} too wide to decide", enc.range),
            };
            PropertyCheck {
                status,
                requirement,
                domain,
                enclosure: Some(enc.range),
                detail,
            }
        }
    }
}

/// Check invariance of `[0,1]`, invariance of the extension and strict
/// contraction with fixed sign of the derivative on the extension.
pub fn validate_map(map: &AnalyticMap) -> ValidationReport {
    validate_map_with(map, &EncloseConfig::default())
}

pub fn validate_map_with(map: &AnalyticMap, cfg: &EncloseConfig) -> ValidationReport {
    let eps = map.epsilon;
    let unit = Interval::new(0.0, 1.0);
    let ext = Interval::new(-eps, 1.0 + eps);
    let invariance = judge(
        format!("f([0,1]) ⊆ [0,1] up to {INVARIANCE_SLACK:e}"),
        unit,
        map.enclose_with_config(unit, 0, cfg),
        |r| -INVARIANCE_SLACK <= r.lo() && r.hi() <= 1.0 + INVARIANCE_SLACK,
    );
    let extended_invariance = judge(
        format!("f([-{eps}, 1+{eps}]) ⊆ (-{eps}, 1+{eps})"),
        ext,
        map.enclose_with_config(ext, 0, cfg),
        |r| r.inside_open(-eps, 1.0 + eps),
    );
    let contraction = judge(
        format!("0 < |f'| < 1 with fixed sign on [-{eps}, 1+{eps}]"),
        ext,
        map.enclose_with_config(ext, 1, cfg),
        |r| r.inside_open(0.0, 1.0) || r.inside_open(-1.0, 0.0),
    );
    ValidationReport {
        invariance,
        extended_invariance,
        contraction,
        analyticity: "assumed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(s: &str) -> AnalyticMap {
        parse_map(s, DEFAULT_EPSILON).unwrap()
    }

    #[test]
    fn jets_of_example_maps() {
        assert_eq!(
            map("x/8").eval_jet(0.0, 2).unwrap().derivatives(),
            &[0.0, 0.125, 0.0]
        );
        assert_eq!(
            map("x/8 + x^2/32").eval_jet(1.0, 2).unwrap().derivatives(),
            &[5.0 / 32.0, 3.0 / 16.0, 1.0 / 16.0]
        );
        assert_eq!(
            map("exp(x)/4").eval_jet(0.0, 3).unwrap().derivatives(),
            &[0.25; 4]
        );
    }

    #[test]
    fn derivative_enclosures() {
        let unit = Interval::new(0.0, 1.0);
        assert_eq!(
            map("x/8").enclose(unit, 1).unwrap().range,
            Interval::point(0.125)
        );
        let e = map("x/8 + x^2/32").enclose(unit, 1).unwrap();
        assert!(e.range.contains(0.125) && e.range.contains(0.1875));
        assert!(e.range.lo() >= 0.125 - 1e-8 && e.range.hi() <= 0.1875 + 1e-8);
        let r = map("x/16 + x^2/32 + 29/32")
            .enclose_ratio(unit, &EncloseConfig::default())
            .unwrap();
        assert!(r.range.contains(0.5) && r.range.contains(1.0));
        assert!(r.range.lo() >= 0.5 - 1e-8 && r.range.hi() <= 1.0 + 1e-8);
    }

    #[test]
    fn validation_verdicts() {
        let ok = validate_map(&map("x/8"));
        assert!(ok.passed());
        assert_eq!(ok.contraction.enclosure, Some(Interval::point(0.125)));

        let bad = validate_map(&map("2*x"));
        assert_eq!(bad.contraction.status, CheckStatus::Fail);
        assert_eq!(bad.contraction.enclosure, Some(Interval::point(2.0)));

        let f3 = validate_map(&map("x/16 + x^2/32 + 29/32"));
        assert!(f3.passed());
        let r = f3.invariance.enclosure.unwrap();
        assert!(r.lo() >= 29.0 / 32.0 - 1e-12 && r.hi() <= 1.0);
    }

    #[test]
    fn vanishing_denominator_is_a_domain_error() {
        assert!(matches!(
            parse_map("1/(x - 0.5)", 0.05),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            parse_map("x/(1 - 1)", 0.05),
            Err(Error::Domain(_))
        ));
        assert!(parse_map("x/(2 + x)", 0.05).is_ok());
    }
}
