//! Koenigs linearization, the series `Ĥ_f`, conjugacy tests and explicit
//! changes of variables.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dual::h;
use crate::enclose::{enclose_with, EncloseConfig};
use crate::error::{Error, EvalError};
use crate::expr::{Expr, Tape};
use crate::ifs::System;
use crate::interval::Interval;
use crate::jet::Jet;
use crate::map::AnalyticMap;
use crate::symbolic::{enumerate_words, Word};

/// Root of `f(x) = x` in `[0,1]` for a map with `f([0,1]) ⊆ [0,1]`, by
/// bisection on `f(x) - x`.
pub fn fixed_point_of(f: impl Fn(f64) -> f64) -> f64 {
    let (mut a, mut b) = (0.0f64, 1.0f64);
    if f(a) - a <= 0.0 {
        return a;
    }
    if f(b) - b >= 0.0 {
        return b;
    }
    while b - a > 1e-15 {
        let m = 0.5 * (a + b);
        if f(m) - m > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub fn fixed_point(map: &AnalyticMap) -> f64 {
    fixed_point_of(|x| map.eval(x).unwrap_or(f64::NAN))
}

type JetFn<'a> = Box<dyn Fn(&Jet<f64>) -> Result<Jet<f64>, EvalError> + Send + Sync + 'a>;

/// Gauss–Legendre nodes and weights on `[0,1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 1..=n {
        let mut t = libm::cos(core::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * t * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let step = p1 / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 + t));
        weights.push(1.0 / ((1.0 - t * t) * dp * dp));
    }
    (nodes, weights)
}

const GL_NODES: usize = 16;
const KOENIGS_GRID: usize = 33;
const KOENIGS_MAX_DEPTH: usize = 2048;

/// The linearizing coordinate `ĝ(x) = lim (f^n(x) - p) / λ^n` of a
/// contraction with fixed point `p` and multiplier `λ = f'(p)`.
///
/// Values use the product `ĝ(x) = (x - p) ∏_k q(f^k(x))` with
/// `q(y) = ∫_0^1 f'(p + s(y - p)) ds / λ`, which avoids the cancellation
/// in `f^n(x) - p`.
pub struct KoenigsMap<'a> {
    f: JetFn<'a>,
    p: f64,
    lambda: f64,
    depth: usize,
    tail: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl core::fmt::Debug for KoenigsMap<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("KoenigsMap")
            .field("p", &self.p)
            .field("lambda", &self.lambda)
            .field("depth", &self.depth)
            .field("tail", &self.tail)
            .finish()
    }
}

impl<'a> KoenigsMap<'a> {
    fn build(f: JetFn<'a>, depth: usize) -> Result<Self, Error> {
        let value = |x: f64| -> f64 {
            f(&Jet::constant(x, 0).expect("order 0"))
                .map(|j| j.value())
                .unwrap_or(f64::NAN)
        };
        let mut p = fixed_point_of(value);
        for _ in 0..3 {
            let j = f(&Jet::variable(p, 1)?)?;
            let step = (j.value() - p) / (j.derivative(1) - 1.0);
            if step.is_finite() && (p - step).abs() <= 1.0 + 1e-12 {
                p -= step;
            }
        }
        let lambda = f(&Jet::variable(p, 1)?)?.derivative(1);
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::Domain(format!(
                "multiplier {lambda} at the fixed point"
            )));
        }
        let (nodes, weights) = gauss_legendre(GL_NODES);
        let mut k = KoenigsMap {
            f,
            p,
            lambda,
            depth: depth.max(1),
            tail: f64::INFINITY,
            nodes,
            weights,
        };
        loop {
            let d = k.depth;
            let mut diff: f64 = 0.0;
            for i in 0..KOENIGS_GRID {
                let x = i as f64 / (KOENIGS_GRID - 1) as f64;
                diff = diff.max((k.value_at_depth(x, d)? - k.value_at_depth(x, 2 * d)?).abs());
            }
            if diff < 1e-12 {
                k.depth = 2 * d;
                k.tail = diff;
                return Ok(k);
            }
            if 2 * d > KOENIGS_MAX_DEPTH {
                return Err(Error::NoConvergence(format!(
                    "Koenigs product at depth {}: change {diff}",
                    2 * d
                )));
            }
            k.depth = 2 * d;
        }
    }

    pub fn fixed_point(&self) -> f64 {
        self.p
    }

    pub fn multiplier(&self) -> f64 {
        self.lambda
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Largest change on the grid between the last two truncations.
    pub fn tail_estimate(&self) -> f64 {
        self.tail
    }

    fn map_value(&self, x: f64) -> Result<f64, EvalError> {
        Ok((self.f)(&Jet::constant(x, 0)?)?.value())
    }

    fn slope(&self, x: f64) -> Result<f64, EvalError> {
        Ok((self.f)(&Jet::variable(x, 1)?)?.derivative(1))
    }

    fn q(&self, y: f64) -> Result<f64, EvalError> {
        let d = y - self.p;
        let mut s = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            s += w * (self.slope(self.p + t * d)? - self.lambda);
        }
        Ok(1.0 + s / self.lambda)
    }

    fn value_at_depth(&self, x: f64, depth: usize) -> Result<f64, EvalError> {
        let mut xk = x;
        let mut prod = x - self.p;
        for _ in 0..depth {
            if xk == self.p || prod == 0.0 {
                break;
            }
            prod *= self.q(xk)?;
            xk = self.map_value(xk)?;
        }
        Ok(prod)
    }

    pub fn value(&self, x: f64) -> Result<f64, EvalError> {
        self.value_at_depth(x, self.depth)
    }

    /// `ĝ'(x) = ∏_k f'(f^k(x)) / λ`.
    pub fn derivative(&self, x: f64) -> Result<f64, EvalError> {
        let mut xk = x;
        let mut prod = 1.0;
        for _ in 0..self.depth {
            prod *= self.slope(xk)? / self.lambda;
            xk = self.map_value(xk)?;
        }
        Ok(prod)
    }

    /// Jet of `ĝ ∘ inner`: the value from the product form and higher
    /// derivatives from `(f^n)^(k) / λ^n`.
    pub fn jet(&self, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError> {
        let x = inner.value();
        let r = inner.order();
        let mut j = Jet::variable(x, r)?;
        let mut scale = 1.0;
        for _ in 0..self.depth {
            j = (self.f)(&j)?;
            scale /= self.lambda;
        }
        let mut d: Vec<f64> = j.derivatives().iter().map(|v| v * scale).collect();
        d[0] = self.value(x)?;
        Ok(Jet::compose(&d, inner))
    }

    /// `sup |ĝ(f(x)) - λ ĝ(x)|` over `points` grid points of `[0,1]`.
    pub fn functional_residual(&self, points: usize) -> Result<f64, EvalError> {
        let mut r: f64 = 0.0;
        for i in 0..points {
            let x = i as f64 / (points - 1) as f64;
            r = r.max((self.value(self.map_value(x)?)? - self.lambda * self.value(x)?).abs());
        }
        Ok(r)
    }
}

/// Koenigs coordinate of a validated map, truncated at `depth` or deeper
/// until successive truncations agree to `1e-12` on a 33-point grid.
pub fn koenigs(map: &AnalyticMap, depth: usize) -> Result<KoenigsMap<'_>, Error> {
    KoenigsMap::build(Box::new(move |j| map.jet(j)), depth)
}

/// Koenigs coordinate of map `i` (zero-based) of a system.
pub fn koenigs_in<S: System + Sync + ?Sized>(
    sys: &S,
    i: usize,
    depth: usize,
) -> Result<KoenigsMap<'_>, Error> {
    KoenigsMap::build(Box::new(move |j| sys.map_jet(i, j)), depth)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeriesValue {
    pub value: f64,
    pub terms: usize,
    pub tail_bound: f64,
}

/// `Σ_k (f''/f')(f^k(x)) (f^k)'(x)`, stopped once `beta |(f^n)'(x)| / (1 - c)`
/// is below `tol`.
pub fn h_hat_series(
    f: &dyn Fn(&Jet<f64>) -> Result<Jet<f64>, EvalError>,
    x: f64,
    c: f64,
    beta: f64,
    tol: f64,
) -> Result<SeriesValue, Error> {
    let mut xk = x;
    let mut dk = 1.0f64;
    let mut sum = 0.0;
    let mut terms = 0;
    loop {
        let tail = beta * dk.abs() / (1.0 - c);
        if tail <= tol || beta == 0.0 {
            return Ok(SeriesValue {
                value: sum,
                terms,
                tail_bound: tail,
            });
        }
        if terms > 100_000 {
            return Err(Error::NoConvergence(String::from("series for H-hat")));
        }
        let j = f(&Jet::variable(xk, 2)?)?;
        sum += j.derivative(2) / j.derivative(1) * dk;
        dk *= j.derivative(1);
        xk = j.value();
        terms += 1;
    }
}

/// `Ĥ_f(x)` for a validated map with tail below `tol`.
pub fn h_hat(map: &AnalyticMap, x: f64, tol: f64) -> Result<SeriesValue, Error> {
    let c = map.derivative_bounds().sup_abs().hi();
    let beta = map
        .ratio_bounds()
        .map_or(f64::INFINITY, |r| r.sup_abs().hi());
    h_hat_series(&|j| map.jet(j), x, c, beta, tol)
}

/// An invertible analytic change of variables mapping `[0,1]` onto itself.
pub trait ChangeOfVariables {
    /// Jet of `g ∘ inner`.
    fn jet(&self, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError>;

    fn value(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.jet(&Jet::constant(x, 0)?)?.value())
    }

    /// `g^{-1}(y)` by safeguarded Newton iteration on `[0,1]`.
    fn inverse(&self, y: f64) -> Result<f64, EvalError> {
        let g0 = self.value(0.0)?;
        let g1 = self.value(1.0)?;
        let inc = g1 > g0;
        let (mut a, mut b) = (0.0f64, 1.0f64);
        let mut x = if (g1 - g0).abs() > 0.0 {
            ((y - g0) / (g1 - g0)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        for _ in 0..200 {
            let j = self.jet(&Jet::variable(x, 1)?)?;
            let r = j.value() - y;
            if r == 0.0 {
                return Ok(x);
            }
            if (r < 0.0) == inc {
                a = x;
            } else {
                b = x;
            }
            let mut next = x - r / j.derivative(1);
            if !(next > a && next < b) {
                next = 0.5 * (a + b);
            }
            if (next - x).abs() <= 1e-16 * x.abs().max(1e-300) || b - a <= f64::EPSILON * 0.5 {
                return Ok(next);
            }
            x = next;
        }
        Ok(x)
    }

    /// `NotMonotone` unless `g'` has a strict sign on `[0,1]`.
    fn check_monotone(&self) -> Result<(), Error>;
}

/// A change of variables given as an expression.
#[derive(Clone, Debug)]
pub struct ExprChange {
    expr: Expr,
    tape: Tape,
}

impl ExprChange {
    pub fn new(expr: Expr) -> Self {
        let tape = Tape::compile(&expr);
        ExprChange { expr, tape }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl ChangeOfVariables for ExprChange {
    fn jet(&self, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError> {
        self.tape.eval_jet(inner)
    }

    fn check_monotone(&self) -> Result<(), Error> {
        let e = enclose_with(Interval::new(0.0, 1.0), 1, &EncloseConfig::default(), |j| {
            self.tape.eval_jet(j)
        })
        .map_err(|_| Error::NotMonotone)?;
        let ends = [self.tape.eval(0.0)?, self.tape.eval(1.0)?];
        let onto =
            (ends[0].min(ends[1]).abs() <= 1e-12) && ((ends[0].max(ends[1]) - 1.0).abs() <= 1e-12);
        if e.range.strict_sign().is_none() {
            return Err(Error::NotMonotone);
        }
        if !onto {
            return Err(Error::InvalidArgument(format!(
                "change of variables maps [0,1] onto [{}, {}]",
                ends[0], ends[1]
            )));
        }
        Ok(())
    }
}

/// Koenigs coordinate rescaled to map `[0,1]` onto itself.
#[derive(Debug)]
pub struct RescaledKoenigs<'a> {
    k: KoenigsMap<'a>,
    offset: f64,
    span: f64,
}

impl<'a> RescaledKoenigs<'a> {
    pub fn new(k: KoenigsMap<'a>) -> Result<Self, Error> {
        let offset = k.value(0.0)?;
        let span = k.value(1.0)? - offset;
        if !(span.abs() > 0.0) {
            return Err(Error::NotMonotone);
        }
        Ok(RescaledKoenigs { k, offset, span })
    }

    pub fn koenigs(&self) -> &KoenigsMap<'a> {
        &self.k
    }
}

impl ChangeOfVariables for RescaledKoenigs<'_> {
    fn jet(&self, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError> {
        let j = self.k.jet(inner)?;
        let mut d: Vec<f64> = j.derivatives().iter().map(|v| v / self.span).collect();
        d[0] = (j.value() - self.offset) / self.span;
        Jet::from_derivatives(&d)
    }

    fn value(&self, x: f64) -> Result<f64, EvalError> {
        Ok((self.k.value(x)? - self.offset) / self.span)
    }

    fn check_monotone(&self) -> Result<(), Error> {
        // ĝ' is a product of ratios f'(y)/f'(p), each positive.
        for i in 0..KOENIGS_GRID {
            let d = self.k.derivative(i as f64 / (KOENIGS_GRID - 1) as f64)?;
            if !(d > 0.0) {
                return Err(Error::NotMonotone);
            }
        }
        Ok(())
    }
}

/// The system `(g ∘ f_i ∘ g^{-1})`, evaluated numerically.
pub struct ConjugatedSystem<'a, S: ?Sized, G> {
    sys: &'a S,
    g: G,
    contraction: f64,
}

impl<S: System + ?Sized, G: ChangeOfVariables> ConjugatedSystem<'_, S, G> {
    pub fn change(&self) -> &G {
        &self.g
    }
}

pub const CONTRACTION_SAMPLES: usize = 257;

pub fn conjugate_ifs<S: System + ?Sized, G: ChangeOfVariables>(
    sys: &S,
    g: G,
) -> Result<ConjugatedSystem<'_, S, G>, Error> {
    g.check_monotone()?;
    let mut c = ConjugatedSystem {
        sys,
        g,
        contraction: 1.0,
    };
    // Sampled, with a small safety factor; not a certified bound.
    let mut sup: f64 = 0.0;
    for i in 0..sys.arity() {
        for k in 0..CONTRACTION_SAMPLES {
            let x = k as f64 / (CONTRACTION_SAMPLES - 1) as f64;
            sup = sup.max(c.map_jet(i, &Jet::variable(x, 1)?)?.derivative(1).abs());
        }
    }
    c.contraction = (sup * 1.01).min(1.0 - 1e-9);
    Ok(c)
}

impl<S: System + ?Sized, G: ChangeOfVariables> System for ConjugatedSystem<'_, S, G> {
    fn arity(&self) -> usize {
        self.sys.arity()
    }

    fn map_jet(&self, i: usize, inner: &Jet<f64>) -> Result<Jet<f64>, EvalError> {
        let y = inner.value();
        let x0 = self.g.inverse(y)?;
        let gj = self.g.jet(&Jet::variable(x0, inner.order().max(1))?)?;
        let ginv = gj.inverse_function(x0)?.truncate(inner.order());
        let pulled = Jet::compose(ginv.derivatives(), inner);
        self.g.jet(&self.sys.map_jet(i, &pulled)?)
    }

    fn map_value(&self, i: usize, x: f64) -> Result<f64, EvalError> {
        self.g.value(self.sys.map_value(i, self.g.inverse(x)?)?)
    }

    fn contraction_bound(&self) -> f64 {
        self.contraction
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize),
    serde(rename_all = "SCREAMING_SNAKE_CASE")
)]
pub enum ConjugacyKind {
    Conjugate,
    SubConjugate,
    NotDetected,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PairDiscrepancy {
    /// One-based generator indices.
    pub i: usize,
    pub j: usize,
    /// `max_x |Ĥ_{f_i}(x) - Ĥ_{f_j}(x)|` over the grid.
    pub max: f64,
    pub argmax: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimilarityParams {
    /// Ratio read off the Koenigs coordinate.
    pub lambda: f64,
    pub translation: f64,
    /// `f_i'(p_i)` at the map's own fixed point.
    pub multiplier: f64,
    pub fixed_point: f64,
    /// `max_x |G(f_i(x)) - lambda G(x) - translation|` on the grid.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ConjugacyVerdict {
    pub kind: ConjugacyKind,
    pub tol: f64,
    pub witness: Option<(Word, Word)>,
    pub max_generator_discrepancy: f64,
    /// Smallest sup-grid discrepancy among all tested pairs.
    pub min_discrepancy: f64,
    pub min_pair: Option<(Word, Word)>,
    pub pairs: Vec<PairDiscrepancy>,
    pub grid: Vec<f64>,
    /// `h_hat[i][k] = Ĥ_{f_(i+1)}(grid[k])`.
    pub h_hat: Vec<Vec<f64>>,
    pub params: Vec<SimilarityParams>,
    pub note: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugacyConfig {
    pub grid: usize,
    pub tol: f64,
    pub max_word_len: usize,
}

impl Default for ConjugacyConfig {
    fn default() -> Self {
        ConjugacyConfig {
            grid: 33,
            tol: 1e-9,
            max_word_len: 4,
        }
    }
}

/// Sampled bound on `|f''/f'|` over the grid, with a safety factor, for
/// tail control on systems without certified enclosures.
fn sampled_beta<S: System + ?Sized>(sys: &S) -> Result<f64, Error> {
    let mut b: f64 = 0.0;
    for i in 0..sys.arity() {
        for k in 0..CONTRACTION_SAMPLES {
            let x = k as f64 / (CONTRACTION_SAMPLES - 1) as f64;
            let j = sys.map_jet(i, &Jet::variable(x, 2)?)?;
            b = b.max((j.derivative(2) / j.derivative(1)).abs());
        }
    }
    Ok(2.0 * b + 1e-300)
}

/// `H` of the periodic word `w^∞`, repeating until successive values agree.
fn h_periodic_numeric<S: System + ?Sized>(sys: &S, w: &Word, x: f64, c: f64) -> Result<f64, Error> {
    let mut reps = 1usize;
    while libm::pow(c, (reps * w.len()) as f64) > 1e-18 && reps < 4096 {
        reps += 1;
    }
    let mut prev = h(sys, &w.repeat(reps), x)?;
    loop {
        let next = h(sys, &w.repeat(reps + 4), x)?;
        if (next - prev).abs() <= 1e-15 * (1.0 + next.abs()) || reps > 8192 {
            return Ok(next);
        }
        reps += 4;
        prev = next;
    }
}

pub fn conjugacy_test<S: System + Sync + ?Sized>(
    sys: &S,
    cfg: &ConjugacyConfig,
) -> Result<ConjugacyVerdict, Error> {
    let n = sys.arity();
    let fps: Vec<f64> = (0..n)
        .map(|i| fixed_point_of(|x| sys.map_value(i, x).unwrap_or(f64::NAN)))
        .collect();
    if fps.iter().all(|&p| (p - fps[0]).abs() <= 1e-12) {
        return Err(Error::SingletonAttractor);
    }
    let m = cfg.grid.max(2);
    let grid: Vec<f64> = (0..m).map(|k| k as f64 / (m - 1) as f64).collect();
    let c = sys.contraction_bound();
    let beta = sampled_beta(sys)?;
    let series_tol = (cfg.tol * 1e-3).min(1e-13);
    let mut table = Vec::with_capacity(n);
    for i in 0..n {
        let f = |j: &Jet<f64>| sys.map_jet(i, j);
        let row = grid
            .iter()
            .map(|&x| Ok(h_hat_series(&f, x, c, beta, series_tol)?.value))
            .collect::<Result<Vec<f64>, Error>>()?;
        table.push(row);
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (mut max, mut argmax) = (0.0f64, 0.0);
            for (k, &x) in grid.iter().enumerate() {
                let d = (table[i][k] - table[j][k]).abs();
                if d > max {
                    max = d;
                    argmax = x;
                }
            }
            pairs.push(PairDiscrepancy {
                i: i + 1,
                j: j + 1,
                max,
                argmax,
            });
        }
    }
    let max_gen = pairs.iter().map(|p| p.max).fold(0.0, f64::max);
    let mut min_disc = pairs.iter().map(|p| p.max).fold(f64::INFINITY, f64::min);
    let mut min_pair = pairs
        .iter()
        .min_by(|a, b| a.max.total_cmp(&b.max))
        .map(|p| (Word::from([p.i as u32]), Word::from([p.j as u32])));
    let note = format!(
        "numerical verdict on a {m}-point grid at tolerance {}; NOT_DETECTED does not prove that no conjugacy exists",
        cfg.tol
    );
    let mut verdict = ConjugacyVerdict {
        kind: ConjugacyKind::NotDetected,
        tol: cfg.tol,
        witness: None,
        max_generator_discrepancy: max_gen,
        min_discrepancy: min_disc,
        min_pair: min_pair.clone(),
        pairs,
        grid: grid.clone(),
        h_hat: table,
        params: Vec::new(),
        note,
    };

    if max_gen <= cfg.tol {
        let g = RescaledKoenigs::new(koenigs_in(sys, 0, 8)?)?;
        let mut params = Vec::with_capacity(n);
        let mut ok = true;
        let gx: Vec<f64> = grid.iter().map(|&x| g.value(x)).collect::<Result<_, _>>()?;
        for (i, &p) in fps.iter().enumerate() {
            let g0 = g.value(sys.map_value(i, 0.0)?)?;
            let g1 = g.value(sys.map_value(i, 1.0)?)?;
            let lambda = g1 - g0;
            let mut residual: f64 = 0.0;
            for (k, &x) in grid.iter().enumerate() {
                residual =
                    residual.max((g.value(sys.map_value(i, x)?)? - lambda * gx[k] - g0).abs());
            }
            let multiplier = sys.map_jet(i, &Jet::variable(p, 1)?)?.derivative(1);
            ok &= residual <= cfg.tol && (lambda - multiplier).abs() <= cfg.tol;
            params.push(SimilarityParams {
                lambda,
                translation: g0,
                multiplier,
                fixed_point: p,
                residual,
            });
        }
        verdict.params = params;
        if ok {
            verdict.kind = ConjugacyKind::Conjugate;
            return Ok(verdict);
        }
    }

    for len in 1..=cfg.max_word_len {
        let words: Vec<Word> = enumerate_words(n, len)?.collect();
        let mut values = Vec::with_capacity(words.len());
        for w in &words {
            let row = grid
                .iter()
                .map(|&x| h_periodic_numeric(sys, w, x, c))
                .collect::<Result<Vec<f64>, Error>>()?;
            values.push(row);
        }
        for a in 0..words.len() {
            for b in a + 1..words.len() {
                let d = values[a]
                    .iter()
                    .zip(&values[b])
                    .map(|(u, v)| (u - v).abs())
                    .fold(0.0, f64::max);
                if d < min_disc {
                    min_disc = d;
                    min_pair = Some((words[a].clone(), words[b].clone()));
                }
                if d <= cfg.tol {
                    verdict.kind = ConjugacyKind::SubConjugate;
                    verdict.witness = Some((words[a].clone(), words[b].clone()));
                    verdict.min_discrepancy = d;
                    verdict.min_pair = verdict.witness.clone();
                    return Ok(verdict);
                }
            }
        }
    }
    verdict.min_discrepancy = min_disc;
    verdict.min_pair = min_pair;
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::h_periodic;
    use crate::ifs::Ifs;
    use crate::map::parse_map;
    use crate::parse_expr;
    use crate::symbolic::PeriodicWord;

    fn three_maps() -> Ifs {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    }

    #[test]
    fn fixed_points() {
        let s = three_maps();
        assert_eq!(fixed_point(s.map(0)), 0.0);
        assert_eq!(fixed_point(s.map(2)), 1.0);
        let m = parse_map("(x+1)/3", 0.05).unwrap();
        assert!((fixed_point(&m) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (t, w) = gauss_legendre(GL_NODES);
        for k in 0..32 {
            let s: f64 = t
                .iter()
                .zip(&w)
                .map(|(t, w)| w * libm::pow(*t, k as f64))
                .sum();
            assert!((s - 1.0 / (k + 1) as f64).abs() < 1e-14, "{k} {s}");
        }
    }

    #[test]
    fn koenigs_of_affine_and_quadratic_maps() {
        let m = parse_map("x/3 + 2/3", 0.05).unwrap();
        let k = koenigs(&m, 1).unwrap();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((k.value(x).unwrap() - (x - 1.0)).abs() < 1e-15);
        }
        let s = three_maps();
        for map in s.maps() {
            let k = koenigs(map, 4).unwrap();
            let p = k.fixed_point();
            assert!(k.value(p).unwrap().abs() < 1e-15);
            assert!((k.derivative(p).unwrap() - 1.0).abs() < 1e-14);
            assert!(k.functional_residual(101).unwrap() <= 1e-10);
            for i in 0..=32 {
                assert!(k.derivative(i as f64 / 32.0).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn h_hat_values() {
        let s = three_maps();
        assert_eq!(h_hat(s.map(0), 0.3, 1e-15).unwrap().value, 0.0);
        let v = h_hat(s.map(1), 0.0, 1e-15).unwrap().value;
        assert!((v - 4.0 / 7.0).abs() < 1e-14);
        for i in 0..3 {
            let w = PeriodicWord::pure(Word::from([i as u32 + 1])).unwrap();
            for k in 0..=10 {
                let x = k as f64 / 10.0;
                let a = h_hat(s.map(i), x, 1e-14).unwrap().value;
                let b = h_periodic(&s, &w, x, 1e-12).unwrap().value;
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn koenigs_linearizes_its_map() {
        let s = three_maps();
        let g = RescaledKoenigs::new(koenigs_in(&s, 1, 4).unwrap()).unwrap();
        let c = conjugate_ifs(&s, g).unwrap();
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            let j = c.map_jet(1, &Jet::variable(x, 2).unwrap()).unwrap();
            assert!(j.derivative(2).abs() <= 1e-9, "{}", j.derivative(2));
        }
        let id = ExprChange::new(parse_expr("x").unwrap());
        let c = conjugate_ifs(&s, id).unwrap();
        assert_eq!(c.map_value(2, 0.4).unwrap(), s.map(2).eval(0.4).unwrap());
    }

    #[test]
    fn non_monotone_change_rejected() {
        let s = three_maps();
        let g = ExprChange::new(parse_expr("4*x*(1-x)").unwrap());
        assert!(matches!(
            conjugate_ifs(&s, g),
            Err(Error::NotMonotone) | Err(Error::InvalidArgument(_))
        ));
        let g = ExprChange::new(parse_expr("(2*x-1)^2").unwrap());
        assert!(conjugate_ifs(&s, g).is_err());
    }

    #[test]
    fn conjugacy_verdicts() {
        let s = Ifs::from_sources(&["x/3", "x/3 + 2/3"], 0.05).unwrap();
        let v = conjugacy_test(&s, &ConjugacyConfig::default()).unwrap();
        assert_eq!(v.kind, ConjugacyKind::Conjugate);
        assert!((v.params[0].lambda - 1.0 / 3.0).abs() < 1e-12);

        let g = ExprChange::new(parse_expr("(exp(x) - 1)/(exp(1) - 1)").unwrap());
        let c = conjugate_ifs(&s, g).unwrap();
        let v = conjugacy_test(&c, &ConjugacyConfig::default()).unwrap();
        assert_eq!(v.kind, ConjugacyKind::Conjugate, "{v:?}");
        for p in &v.params {
            assert!((p.lambda - 1.0 / 3.0).abs() <= 1e-8);
        }

        let v = conjugacy_test(&three_maps(), &ConjugacyConfig::default()).unwrap();
        assert_eq!(v.kind, ConjugacyKind::NotDetected);
        assert!(((v.h_hat[0][0] - v.h_hat[1][0]).abs() - 4.0 / 7.0).abs() <= 1e-9);

        let one = Ifs::from_sources(&["x/2"], 0.05).unwrap();
        assert_eq!(
            conjugacy_test(&one, &ConjugacyConfig::default()),
            Err(Error::SingletonAttractor)
        );
    }
}
