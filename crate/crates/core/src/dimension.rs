//! Pressure, conformality dimension, entropy and Lyapunov exponents.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ddouble::DoubleDouble;
use crate::dual::dual_sup_bound;
use crate::error::Error;
use crate::ifs::{Ifs, System};
use crate::scalar::Scalar;
use crate::separation::{sesc_certify, SescVerdict};
use crate::symbolic::{compose_eval, enumerate_words, Orientation};

/// Entries at or below this are treated as degenerate.
pub const MIN_PROBABILITY: f64 = 1e-12;
pub const PRESSURE_GRID: usize = 33;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self, Error> {
        if p.is_empty() {
            return Err(Error::InvalidProbability(String::from("empty vector")));
        }
        if let Some((i, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > MIN_PROBABILITY))
        {
            return Err(Error::InvalidProbability(format!(
                "entry {} is {v}, need > {MIN_PROBABILITY}",
                i + 1
            )));
        }
        let total = neumaier(p.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbability(format!("entries sum to {total}")));
        }
        Ok(ProbabilityVector(
            p.into_iter().map(|v| v / total).collect(),
        ))
    }

    pub fn uniform(n: usize) -> Result<Self, Error> {
        if n == 0 {
            return Err(Error::InvalidProbability(String::from("empty vector")));
        }
        Ok(ProbabilityVector(alloc::vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index `i` with cumulative weight first exceeding `u`.
    fn sample(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.0.len() - 1
    }
}

/// Compensated sum.
pub fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `log sup |f_w'|` for every word of one length, from which `P_n(t)` is
/// cheap for any `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct PressureTable {
    pub depth: usize,
    pub arity: usize,
    pub log_sups: Vec<f64>,
}

impl PressureTable {
    /// Sup over a grid of `grid` points plus the slack
    /// `h/2 * c_max^n * C0` that bounds `|f_w''|` times half the spacing.
    pub fn new(ifs: &Ifs, depth: usize, grid: usize) -> Result<Self, Error> {
        if depth == 0 {
            return Err(Error::InvalidArgument(String::from(
                "pressure needs depth >= 1",
            )));
        }
        let grid = grid.max(2);
        let h = 1.0 / (grid - 1) as f64;
        let slack = h / 2.0 * libm::pow(ifs.c_max().hi(), depth as f64) * dual_sup_bound(ifs);
        let mut log_sups = Vec::new();
        for w in enumerate_words(ifs.arity(), depth)? {
            let mut sup: f64 = 0.0;
            for k in 0..grid {
                let j = compose_eval(ifs, &w, Orientation::Forward, k as f64 * h, 1)?;
                sup = sup.max(j.jet.derivative(1).abs());
            }
            log_sups.push(libm::log(sup + slack));
        }
        Ok(PressureTable {
            depth,
            arity: ifs.arity(),
            log_sups,
        })
    }

    /// `P_n(t) = (1/n) log sum_w sup|f_w'|^t`, by log-sum-exp.
    pub fn pressure(&self, t: f64) -> f64 {
        if t == 0.0 {
            // correctly rounded log N
            return DoubleDouble::new(self.arity as f64)
                .ln()
                .map_or(f64::NAN, |v| v.to_f64());
        }
        let m = self
            .log_sups
            .iter()
            .map(|l| t * l)
            .fold(f64::NEG_INFINITY, f64::max);
        let s = neumaier(self.log_sups.iter().map(|l| libm::exp(t * l - m)));
        (m + libm::log(s)) / self.depth as f64
    }
}

pub fn pressure(ifs: &Ifs, t: f64, depth: usize) -> Result<f64, Error> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pressure needs t >= 0, got {t}"
        )));
    }
    Ok(PressureTable::new(ifs, depth, PRESSURE_GRID)?.pressure(t))
}

/// Points `(t, P_n(t))`.
pub fn pressure_curve(ifs: &Ifs, depth: usize, ts: &[f64]) -> Result<Vec<(f64, f64)>, Error> {
    let table = PressureTable::new(ifs, depth, PRESSURE_GRID)?;
    Ok(ts.iter().map(|&t| (t, table.pressure(t))).collect())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConformalityDimension {
    pub value: f64,
    /// Bisection bracket `[lo, hi]` with `P_n(lo) > 0 >= P_n(hi)`.
    pub lo: f64,
    pub hi: f64,
    pub depth: usize,
    pub pressure_at_root: f64,
    /// `|s_n - s_(n-1)|`, a heuristic for the finite-depth error.
    pub spread: f64,
}

fn root_of(table: &PressureTable, tol: f64) -> (f64, f64) {
    let mut hi = 1.0;
    while table.pressure(hi) > 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if table.pressure(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

pub fn conformality_dimension(
    ifs: &Ifs,
    depth: usize,
    tol: f64,
) -> Result<ConformalityDimension, Error> {
    if !ifs.has_nontrivial_attractor() {
        return Err(Error::SingletonAttractor);
    }
    let table = PressureTable::new(ifs, depth, PRESSURE_GRID)?;
    let (lo, hi) = root_of(&table, tol);
    let value = 0.5 * (lo + hi);
    let spread = if depth >= 2 {
        let (l2, h2) = root_of(&PressureTable::new(ifs, depth - 1, PRESSURE_GRID)?, tol);
        (0.5 * (l2 + h2) - value).abs()
    } else {
        0.0
    };
    Ok(ConformalityDimension {
        value,
        lo,
        hi,
        depth,
        pressure_at_root: table.pressure(value),
        spread,
    })
}

pub fn entropy(p: &ProbabilityVector) -> f64 {
    -neumaier(p.as_slice().iter().map(|&v| v * libm::log(v)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MonteCarlo {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChaosConfig {
    pub samples: usize,
    /// Burn-in steps per trajectory.
    pub horizon: usize,
    pub seed: u64,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        ChaosConfig {
            samples: 100_000,
            horizon: 50,
            seed: 0,
        }
    }
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Endpoint of trajectory `k`: `f_(i_h) ∘ ... ∘ f_(i_1)(1/2)` with i.i.d.
/// letters, whose law equals that of the reversed composition. Each
/// trajectory has its own stream so results do not depend on scheduling.
pub fn chaos_point<S: System + ?Sized>(
    sys: &S,
    p: &ProbabilityVector,
    k: u64,
    horizon: usize,
    seed: u64,
) -> Result<f64, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let mut x = 0.5;
    for _ in 0..horizon {
        let i = p.sample(unit_f64(&mut rng));
        x = sys.map_value(i, x)?;
    }
    Ok(x)
}

/// `-sum_i p_i log|f_i'(x)|` at chaos-game points `k` in `range`.
pub fn lyapunov_samples(
    ifs: &Ifs,
    p: &ProbabilityVector,
    range: core::ops::Range<u64>,
    horizon: usize,
    seed: u64,
) -> Result<Vec<f64>, Error> {
    check_arity(ifs, p)?;
    range
        .map(|k| {
            let x = chaos_point(ifs, p, k, horizon, seed)?;
            let mut terms = Vec::with_capacity(p.len());
            for (i, &pi) in p.as_slice().iter().enumerate() {
                let d = ifs.map(i).eval_jet(x, 1)?.derivative(1).abs();
                terms.push(-pi * libm::log(d));
            }
            Ok(neumaier(terms.into_iter()))
        })
        .collect()
}

pub fn summarize(values: &[f64]) -> MonteCarlo {
    let n = values.len();
    let mean = neumaier(values.iter().copied()) / n as f64;
    let stderr = if n > 1 {
        let var = neumaier(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
        libm::sqrt(var / n as f64)
    } else {
        0.0
    };
    MonteCarlo {
        mean,
        stderr,
        samples: n,
    }
}

fn check_arity(ifs: &Ifs, p: &ProbabilityVector) -> Result<(), Error> {
    if ifs.arity() != p.len() {
        return Err(Error::ArityMismatch(ifs.arity(), p.len()));
    }
    Ok(())
}

pub fn lyapunov(ifs: &Ifs, p: &ProbabilityVector, cfg: &ChaosConfig) -> Result<MonteCarlo, Error> {
    let v = lyapunov_samples(ifs, p, 0..cfg.samples as u64, cfg.horizon, cfg.seed)?;
    Ok(summarize(&v))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DimensionReport {
    pub conformality: ConformalityDimension,
    pub weights: ProbabilityVector,
    pub entropy: f64,
    pub lyapunov: MonteCarlo,
    /// `min(1, s)`, upper bound for the dimension of the attractor.
    pub set_bound: f64,
    /// `min(1, H/chi)`, upper bound for the dimension of the measure.
    pub measure_bound: f64,
    pub sesc: Option<SescVerdict>,
    /// Set only when the separation certificate was accepted.
    pub bounds_attained: bool,
}

pub fn dimension_bounds(
    ifs: &Ifs,
    p: &ProbabilityVector,
    depth: usize,
    tol: f64,
    chaos: &ChaosConfig,
) -> Result<DimensionReport, Error> {
    let chi = lyapunov(ifs, p, chaos)?;
    dimension_report(ifs, p, depth, tol, chi)
}

/// As [`dimension_bounds`] with the Lyapunov estimate supplied.
pub fn dimension_report(
    ifs: &Ifs,
    p: &ProbabilityVector,
    depth: usize,
    tol: f64,
    lyapunov: MonteCarlo,
) -> Result<DimensionReport, Error> {
    check_arity(ifs, p)?;
    let conformality = conformality_dimension(ifs, depth, tol)?;
    let h = entropy(p);
    let sesc = if ifs.arity() >= 2 {
        Some(sesc_certify(ifs)?.verdict)
    } else {
        None
    };
    Ok(DimensionReport {
        set_bound: conformality.value.min(1.0),
        measure_bound: (h / lyapunov.mean).min(1.0),
        conformality,
        weights: p.clone(),
        entropy: h,
        lyapunov,
        bounds_attained: sesc == Some(SescVerdict::Accept),
        sesc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moran(r: &str) -> Ifs {
        Ifs::from_sources(&[&format!("x*{r}"), &format!("x*{r} + 1 - {r}")], 0.05).unwrap()
    }

    #[test]
    fn pressure_at_zero_and_self_similar() {
        let s = Ifs::from_sources(&["x/2", "x/4 + 3/4"], 0.05).unwrap();
        for n in 1..5 {
            assert_eq!(pressure(&s, 0.0, n).unwrap(), libm::log(2.0));
            let p = pressure(&s, 1.3, n).unwrap();
            let want = libm::log(libm::pow(0.5, 1.3) + libm::pow(0.25, 1.3));
            assert!((p - want).abs() < 1e-13, "{p} {want}");
        }
    }

    #[test]
    fn moran_dimensions() {
        let s = conformality_dimension(&moran("1/2"), 6, 1e-10).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
        let s = conformality_dimension(&moran("1/3"), 6, 1e-10).unwrap();
        assert!((s.value - libm::log(2.0) / libm::log(3.0)).abs() < 1e-6);
        let one = Ifs::from_sources(&["x/2"], 0.05).unwrap();
        assert_eq!(
            conformality_dimension(&one, 3, 1e-9),
            Err(Error::SingletonAttractor)
        );
    }

    #[test]
    fn probability_vectors() {
        assert!(ProbabilityVector::new(alloc::vec![1.0 - 1e-12, 1e-12]).is_err());
        assert!(ProbabilityVector::new(alloc::vec![0.5, 0.6]).is_err());
        let p = ProbabilityVector::new(alloc::vec![0.5, 0.25, 0.25]).unwrap();
        assert!((entropy(&p) - 1.5 * libm::log(2.0)).abs() < 1e-15);
        assert!((entropy(&ProbabilityVector::uniform(3).unwrap()) - libm::log(3.0)).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_of_self_similar_is_exact() {
        let s = Ifs::from_sources(&["x/2", "x/4 + 3/4"], 0.05).unwrap();
        let p = ProbabilityVector::new(alloc::vec![0.3, 0.7]).unwrap();
        let cfg = ChaosConfig {
            samples: 500,
            horizon: 50,
            seed: 7,
        };
        let chi = lyapunov(&s, &p, &cfg).unwrap();
        let want = -(0.3 * libm::log(0.5) + 0.7 * libm::log(0.25));
        assert!((chi.mean - want).abs() < 1e-12);
        assert_eq!(chi, lyapunov(&s, &p, &cfg).unwrap());
    }

    #[test]
    fn chaos_points_stay_in_unit_interval() {
        let s = Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap();
        let p = ProbabilityVector::uniform(3).unwrap();
        for k in 0..200 {
            let x = chaos_point(&s, &p, k, 50, 1).unwrap();
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
