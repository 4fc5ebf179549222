//! Iterated function systems of validated analytic maps.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::enclose::EncloseConfig;
use crate::error::{Error, EvalError};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::map::{parse_map, validate_map_with, AnalyticMap};
use crate::scalar::Scalar;

/// Anything that behaves like a finite family of contractions of `[0,1]`
/// with jets available. Map indices are zero-based here; words use letters
/// starting at 1.
pub trait System {
    fn arity(&self) -> usize;

    /// Jet of `f_i ∘ inner`.
    fn map_jet(&self, i: usize, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError>;

    fn map_value(&self, i: usize, x: f64) -> Result<f64, EvalError> {
        Ok(self.map_jet(i, &Jet::constant(x, 0)?)?.value())
    }

    /// Upper bound on `sup |f_i'|` over all maps.
    fn contraction_bound(&self) -> f64;
}

#[derive(Clone, Debug)]
pub struct Ifs {
    maps: Vec<AnalyticMap>,
    epsilon: f64,
    config: EncloseConfig,
    c_min: Interval,
    c_max: Interval,
    beta: Interval,
}

fn hull_fold(items: impl Iterator<Item = Interval>, pick_max: bool) -> Interval {
    let mut lo = if pick_max {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    };
    let mut hi = lo;
    for v in items {
        if pick_max {
            lo = lo.max(v.lo());
            hi = hi.max(v.hi());
        } else {
            lo = lo.min(v.lo());
            hi = hi.min(v.hi());
        }
    }
    Interval::new(lo, hi)
}

impl Ifs {
    /// Build a system, rejecting maps outside the admissible class.
    pub fn new(maps: Vec<AnalyticMap>) -> Result<Self, Error> {
        Self::with_config(maps, EncloseConfig::default())
    }

    pub fn with_config(maps: Vec<AnalyticMap>, config: EncloseConfig) -> Result<Self, Error> {
        if maps.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "a system needs at least one map",
            )));
        }
        for (index, m) in maps.iter().enumerate() {
            let report = validate_map_with(m, &config);
            let failure = report
                .failures()
                .next()
                .map(|c| format!("{} ({:?}): {}", c.requirement, c.status, c.detail));
            if let Some(reason) = failure {
                return Err(Error::InvalidMap {
                    index: index + 1,
                    reason,
                });
            }
        }
        Ok(Self::assemble(maps, config))
    }

    /// Build from maps that already passed `validate_map_with(_, &config)`.
    pub(crate) fn assemble(maps: Vec<AnalyticMap>, config: EncloseConfig) -> Self {
        let epsilon = maps[0].epsilon();
        let c_min = hull_fold(maps.iter().map(|m| m.derivative_bounds().inf_abs()), false);
        let c_max = hull_fold(maps.iter().map(|m| m.derivative_bounds().sup_abs()), true);
        let beta = hull_fold(
            maps.iter().map(|m| {
                m.ratio_bounds()
                    .expect("validated maps have a ratio enclosure")
                    .sup_abs()
            }),
            true,
        );
        Ifs {
            maps,
            epsilon,
            config,
            c_min,
            c_max,
            beta,
        }
    }

    pub fn from_sources(sources: &[&str], epsilon: f64) -> Result<Self, Error> {
        let maps = sources
            .iter()
            .map(|s| parse_map(s, epsilon))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(maps)
    }

    pub fn maps(&self) -> &[AnalyticMap] {
        &self.maps
    }

    /// Map with zero-based index `i`.
    pub fn map(&self, i: usize) -> &AnalyticMap {
        &self.maps[i]
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn config(&self) -> &EncloseConfig {
        &self.config
    }

    /// Certified bounds on `inf_i inf_x |f_i'(x)|` over `[0,1]`.
    pub fn c_min(&self) -> Interval {
        self.c_min
    }

    /// Certified bounds on `sup_i sup_x |f_i'(x)|` over `[0,1]`.
    pub fn c_max(&self) -> Interval {
        self.c_max
    }

    /// Certified bounds on `sup_i sup_x |f_i''(x)/f_i'(x)|` over `[0,1]`.
    pub fn beta(&self) -> Interval {
        self.beta
    }

    pub fn jet<T: Scalar>(&self, i: usize, inner: &Jet<T>) -> Result<Jet<T>, EvalError> {
        self.maps[i].jet(inner)
    }

    /// True when two maps have distinct fixed points, so the attractor is
    /// not a single point.
    pub fn has_nontrivial_attractor(&self) -> bool {
        let fp: Vec<f64> = self
            .maps
            .iter()
            .map(|m| crate::conjugation::fixed_point(m))
            .collect();
        fp.iter().any(|&p| (p - fp[0]).abs() > 1e-12)
    }
}

impl System for Ifs {
    fn arity(&self) -> usize {
        self.maps.len()
    }

    fn map_jet(&self, i: usize, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError> {
        self.maps[i].jet(inner)
    }

    fn map_value(&self, i: usize, x: f64) -> Result<f64, EvalError> {
        self.maps[i].eval(x)
    }

    fn contraction_bound(&self) -> f64 {
        self.c_max.hi()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn three_maps() -> Ifs {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    }

    #[test]
    fn three_map_constants() {
        let s = three_maps();
        let c = s.c_max();
        assert!(c.contains(3.0 / 16.0) && c.width() <= 1e-9, "{c}");
        assert!(s.c_min().contains(1.0 / 16.0));
        assert!(s.beta().contains(1.0) && s.beta().hi() <= 1.0 + 1e-9);
    }

    #[test]
    fn invalid_member_is_reported_with_index() {
        let err = Ifs::from_sources(&["x/2", "2*x"], 0.05).unwrap_err();
        assert!(matches!(err, Error::InvalidMap { index: 2, .. }));
    }

    #[test]
    fn attractor_triviality() {
        assert!(three_maps().has_nontrivial_attractor());
        assert!(!Ifs::from_sources(&["x/2"], 0.05)
            .unwrap()
            .has_nontrivial_attractor());
    }
}
