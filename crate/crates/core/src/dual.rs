//! The dual system: lifted operators `F_i h = f_i' * (h ∘ f_i) + f_i''/f_i'`,
//! the dual projections `H_w = F_w 0`, cylinders and their disjointness.

use alloc::vec::Vec;

use crate::error::{Error, EvalError};
use crate::ifs::{Ifs, System};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::scalar::Scalar;
use crate::symbolic::{common_prefix, enumerate_words, PeriodicWord, Word};

/// `H_w(x)` together with the reversed composition's value and slope at `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualValue<T> {
    pub h: T,
    /// `f'_{w, reversed}(x)`
    pub slope: T,
    /// `f_{w, reversed}(x)`
    pub image: T,
}

fn dual_loop<T: Scalar>(
    word: &Word,
    x: T,
    mut map_jet: impl FnMut(usize, &Jet<T>) -> Result<Jet<T>, EvalError>,
) -> Result<DualValue<T>, EvalError> {
    let mut h = T::zero();
    let mut slope = T::one();
    let mut y = x;
    for &l in word.letters() {
        let j = map_jet(l as usize - 1, &Jet::variable(y, 2)?)?;
        h = h + j.derivative(2).checked_div(j.derivative(1))? * slope;
        slope = slope * j.derivative(1);
        y = j.value();
    }
    Ok(DualValue { h, slope, image: y })
}

pub fn dual_value<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    x: f64,
) -> Result<DualValue<f64>, Error> {
    word.check(sys.arity())?;
    Ok(dual_loop(word, x, |i, j| sys.map_jet(i, j))?)
}

/// Same as [`dual_value`] over any scalar type, e.g. intervals for
/// certified values.
pub fn dual_value_scalar<T: Scalar>(ifs: &Ifs, word: &Word, x: T) -> Result<DualValue<T>, Error> {
    word.check(ifs.arity())?;
    Ok(dual_loop(word, x, |i, j| ifs.jet(i, j))?)
}

/// The dual projection `H_w(x) = Σ_n (f''_{i_n}/f'_{i_n})(f_{w_{n-1}^1}(x)) f'_{w_{n-1}^1}(x)`.
pub fn h<S: System + ?Sized>(sys: &S, word: &Word, x: f64) -> Result<f64, Error> {
    Ok(dual_value(sys, word, x)?.h)
}

/// Certified upper bound on `sup |H_w|` over all words: `D_1 / (1 - c_max)`.
pub fn dual_sup_bound(ifs: &Ifs) -> f64 {
    let d1 = Interval::point(ifs.beta().hi());
    let gap = Interval::ONE - Interval::point(ifs.c_max().hi());
    d1.checked_div(gap).map(|v| v.hi()).unwrap_or(f64::INFINITY)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct TruncatedValue {
    pub value: f64,
    pub depth: usize,
    /// Bound on the distance to the value of the infinite word.
    pub tail_bound: f64,
}

/// `H` of an infinite periodic word, truncated once the tail bound
/// `2 C_0 c_max^depth` drops below `1e-3 * tol`.
pub fn h_periodic(
    ifs: &Ifs,
    word: &PeriodicWord,
    x: f64,
    tol: f64,
) -> Result<TruncatedValue, Error> {
    let c0 = dual_sup_bound(ifs);
    let c = ifs.c_max().hi();
    let mut depth = word.preperiod.len().max(1);
    let mut tail = 2.0 * c0 * libm::pow(c, depth as f64);
    while tail >= 1e-3 * tol && tail > 0.0 {
        depth += 1;
        tail *= c;
        if depth > 100_000 {
            return Err(Error::NoConvergence(alloc::string::String::from(
                "periodic dual projection",
            )));
        }
    }
    let value = h(ifs, &word.truncate(depth), x)?;
    Ok(TruncatedValue {
        value,
        depth,
        tail_bound: tail,
    })
}

/// `|H_w(x) - f''/f'(x)|` for the reversed composition, computed from the
/// composed jet rather than the sum.
pub fn h_identity_check<S: System + ?Sized>(sys: &S, word: &Word, x: f64) -> Result<f64, Error> {
    let hv = h(sys, word, x)?;
    let j =
        crate::symbolic::compose_eval(sys, word, crate::symbolic::Orientation::Reversed, x, 2)?.jet;
    let ratio = j.derivative(2) / j.derivative(1);
    Ok((hv - ratio).abs())
}

/// `(F_i h)(x)` for the zero-based map index `i`.
pub fn apply_lift<S: System + ?Sized>(
    sys: &S,
    i: usize,
    h: impl Fn(f64) -> f64,
    x: f64,
) -> Result<f64, Error> {
    let j = sys.map_jet(i, &Jet::variable(x, 2)?)?;
    Ok(j.derivative(1) * h(j.value()) + j.derivative(2) / j.derivative(1))
}

/// Constants `k < K` with `F_i [k, K] ⊂ (k, K)` for every map.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Envelope {
    pub lower: f64,
    pub upper: f64,
}

impl Envelope {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn as_interval(&self) -> Interval {
        Interval::new(self.lower, self.upper)
    }
}

/// Enclosure of `{(F_i h)(x) : x ∈ [0,1], h(x) ∈ band}`.
pub fn lift_image(ifs: &Ifs, i: usize, band: Interval) -> Interval {
    let m = ifs.map(i);
    let ratio = m
        .ratio_bounds()
        .expect("validated maps have a ratio enclosure")
        .range;
    m.derivative_bounds().range * band + ratio
}

/// Certified check that every lifted map sends `[k, K]` into `(k, K)`.
pub fn verify_envelope(ifs: &Ifs, env: &Envelope) -> bool {
    let band = env.as_interval();
    (0..ifs.arity()).all(|i| lift_image(ifs, i, band).inside_open(env.lower, env.upper))
}

/// The default envelope `k, K = ∓(C_0/(1 - c_max) + 1)`, grown until verified.
pub fn choose_envelope(ifs: &Ifs) -> Result<Envelope, Error> {
    let c0 = dual_sup_bound(ifs);
    let c = ifs.c_max().hi();
    let mut r = c0 / (1.0 - c) + 1.0;
    for _ in 0..60 {
        let env = Envelope {
            lower: -r,
            upper: r,
        };
        if r.is_finite() && verify_envelope(ifs, &env) {
            return Ok(env);
        }
        r *= 2.0;
    }
    Err(Error::EnvelopeNotFound)
}

/// An envelope hugging the dual attractor: iterate the interval hull of the
/// lifted images from `{0}`, then widen by a verified margin.
pub fn tight_envelope(ifs: &Ifs) -> Result<Envelope, Error> {
    let mut band = Interval::ZERO;
    for _ in 0..10_000 {
        let next = (0..ifs.arity())
            .map(|i| lift_image(ifs, i, band))
            .fold(band, |a, b| a.hull(&b));
        let moved = (next.lo() - band.lo())
            .abs()
            .max((next.hi() - band.hi()).abs());
        band = next;
        if moved <= 1e-15 * (1.0 + band.mag()) {
            break;
        }
    }
    let mut margin = 1e-12 * (1.0 + band.mag());
    for _ in 0..60 {
        let env = Envelope {
            lower: band.lo() - margin,
            upper: band.hi() + margin,
        };
        if verify_envelope(ifs, &env) {
            return Ok(env);
        }
        margin *= 4.0;
    }
    choose_envelope(ifs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize),
    serde(rename_all = "SCREAMING_SNAKE_CASE")
)]
pub enum CylinderVerdict {
    Disjoint,
    Overlapping,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct CylinderResult {
    pub pair: (Word, Word),
    pub verdict: CylinderVerdict,
    /// Point where the gap is largest among those tried.
    pub witness_x: f64,
    /// Certified lower bound on the gap at the witness when disjoint,
    /// otherwise the best floating estimate (negative means overlap).
    pub gap: f64,
    /// Widths of the two bands at the witness.
    pub enclosure_widths: (f64, f64),
}

fn band_f64(dv: &DualValue<f64>, env: &Envelope) -> (f64, f64) {
    let a = dv.h + dv.slope * env.lower;
    let b = dv.h + dv.slope * env.upper;
    (a.min(b), a.max(b))
}

fn gap_of(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.1).max(a.0 - b.1)
}

fn band_interval(ifs: &Ifs, w: &Word, x: Interval, env: &Envelope) -> Result<Interval, Error> {
    let dv = dual_value_scalar(ifs, w, x)?;
    Ok(dv.h + dv.slope * env.as_interval())
}

/// Certified lower bound on the gap between the two bands at `x`.
pub fn certified_gap(ifs: &Ifs, a: &Word, b: &Word, x: f64, env: &Envelope) -> Result<f64, Error> {
    let p = Interval::point(x);
    let ba = band_interval(ifs, a, p, env)?;
    let bb = band_interval(ifs, b, p, env)?;
    let g1 = (Interval::point(bb.lo()) - Interval::point(ba.hi())).lo();
    let g2 = (Interval::point(ba.lo()) - Interval::point(bb.hi())).lo();
    Ok(g1.max(g2))
}

// Lower and upper edge functions of a band on a piece.
fn edges(ifs: &Ifs, w: &Word, x: Interval, env: &Envelope) -> Option<(Interval, Interval)> {
    let dv = dual_value_scalar(ifs, w, x).ok()?;
    let lo = dv.h + dv.slope * Interval::point(env.lower);
    let hi = dv.h + dv.slope * Interval::point(env.upper);
    match dv.slope.strict_sign()? {
        s if s > 0.0 => Some((lo, hi)),
        _ => Some((hi, lo)),
    }
}

const OVERLAP_PIECES: usize = 4096;

/// Proof that the bands intersect at every `x ∈ [0,1]`.
pub fn certify_overlap(ifs: &Ifs, a: &Word, b: &Word, env: &Envelope) -> bool {
    let mut stack = alloc::vec![Interval::new(0.0, 1.0)];
    let mut evaluated = 0usize;
    while let Some(x) = stack.pop() {
        evaluated += 1;
        if evaluated > OVERLAP_PIECES {
            return false;
        }
        let ok = match (edges(ifs, a, x, env), edges(ifs, b, x, env)) {
            (Some((la, ua)), Some((lb, ub))) => la.hi().max(lb.hi()) <= ua.lo().min(ub.lo()),
            _ => false,
        };
        if !ok {
            if x.width() < 1e-6 {
                return false;
            }
            let (l, r) = x.split();
            stack.push(r);
            stack.push(l);
        }
    }
    true
}

pub const WITNESS_GRID: usize = 64;
pub const REFINE_ROUNDS: usize = 12;

fn grid(m: usize) -> impl Iterator<Item = f64> {
    (0..m).map(move |j| j as f64 / (m - 1) as f64)
}

/// Decide whether the cylinders `F_a(k,K)` and `F_b(k,K)` are disjoint.
pub fn cylinders_disjoint(
    ifs: &Ifs,
    a: &Word,
    b: &Word,
    env: &Envelope,
) -> Result<CylinderResult, Error> {
    cylinders_disjoint_with(ifs, a, b, env, &[])
}

/// As [`cylinders_disjoint`], also trying the given points as witnesses.
pub fn cylinders_disjoint_with(
    ifs: &Ifs,
    a: &Word,
    b: &Word,
    env: &Envelope,
    hints: &[f64],
) -> Result<CylinderResult, Error> {
    if a == b {
        return Err(Error::InvalidArgument(alloc::format!(
            "cylinder words coincide: {a}"
        )));
    }
    let gap_at = |x: f64| -> Result<(f64, (f64, f64), (f64, f64)), Error> {
        let ba = band_f64(&dual_value(ifs, a, x)?, env);
        let bb = band_f64(&dual_value(ifs, b, x)?, env);
        Ok((gap_of(ba, bb), ba, bb))
    };
    let mut best_x = 0.0;
    let mut best = f64::NEG_INFINITY;
    for x in grid(WITNESS_GRID).chain(hints.iter().copied().filter(|h| (0.0..=1.0).contains(h))) {
        let g = gap_at(x)?.0;
        if g > best {
            best = g;
            best_x = x;
        }
    }
    finish_pair(ifs, a, b, env, best_x, best, gap_at)
}

fn finish_pair(
    ifs: &Ifs,
    a: &Word,
    b: &Word,
    env: &Envelope,
    mut best_x: f64,
    mut best: f64,
    gap_at: impl Fn(f64) -> Result<(f64, (f64, f64), (f64, f64)), Error>,
) -> Result<CylinderResult, Error> {
    let mut cert = if best > 0.0 {
        certified_gap(ifs, a, b, best_x, env)?
    } else {
        f64::NEG_INFINITY
    };
    if cert <= 0.0 {
        let mut r = 1.0 / (WITNESS_GRID - 1) as f64;
        for _ in 0..REFINE_ROUNDS {
            r /= 3.0;
            let center = best_x;
            for x in [center - r, center + r] {
                if (0.0..=1.0).contains(&x) {
                    let g = gap_at(x)?.0;
                    if g > best {
                        best = g;
                        best_x = x;
                    }
                }
            }
        }
        if best > 0.0 {
            cert = certified_gap(ifs, a, b, best_x, env)?;
        }
    }
    let (_, ba, bb) = gap_at(best_x)?;
    let widths = (ba.1 - ba.0, bb.1 - bb.0);
    let pair = (a.clone(), b.clone());
    if cert > 0.0 {
        return Ok(CylinderResult {
            pair,
            verdict: CylinderVerdict::Disjoint,
            witness_x: best_x,
            gap: cert,
            enclosure_widths: widths,
        });
    }
    let verdict = if certify_overlap(ifs, a, b, env) {
        CylinderVerdict::Overlapping
    } else {
        CylinderVerdict::Inconclusive
    };
    Ok(CylinderResult {
        pair,
        verdict,
        witness_x: best_x,
        gap: best,
        enclosure_widths: widths,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize),
    serde(rename_all = "SCREAMING_SNAKE_CASE")
)]
pub enum DualSscVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DualSscReport {
    pub depth: usize,
    pub envelope: Envelope,
    pub verdict: DualSscVerdict,
    pub pairs_checked: usize,
    /// Smallest certified gap over all pairs, when every pair is disjoint.
    pub min_gap: Option<f64>,
    pub min_gap_pair: Option<(Word, Word)>,
    /// Pairs that are not certified disjoint.
    pub failures: Vec<CylinderResult>,
}

/// Precomputed words and grid bands for a depth-`n` scan.
pub struct DualScan<'a> {
    ifs: &'a Ifs,
    envelope: Envelope,
    depth: usize,
    words: Vec<Word>,
    bands: Vec<Vec<(f64, f64)>>,
    hints: Vec<f64>,
    grid: Vec<f64>,
}

impl<'a> DualScan<'a> {
    pub fn new(
        ifs: &'a Ifs,
        depth: usize,
        envelope: Envelope,
        hints: &[f64],
    ) -> Result<Self, Error> {
        let words: Vec<Word> = enumerate_words(ifs.arity(), depth)?.collect();
        let grid: Vec<f64> = grid(WITNESS_GRID)
            .chain(hints.iter().copied().filter(|h| (0.0..=1.0).contains(h)))
            .collect();
        let mut bands = Vec::with_capacity(words.len());
        for w in &words {
            let row = grid
                .iter()
                .map(|&x| Ok(band_f64(&dual_value(ifs, w, x)?, &envelope)))
                .collect::<Result<Vec<_>, Error>>()?;
            bands.push(row);
        }
        Ok(DualScan {
            ifs,
            envelope,
            depth,
            words,
            bands,
            hints: hints.to_vec(),
            grid,
        })
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    /// Pairs of distinct first letters `(p, q)` with `p < q`, one block each.
    pub fn blocks(&self) -> Vec<(u32, u32)> {
        let n = self.ifs.arity() as u32;
        if self.depth == 0 {
            return Vec::new();
        }
        let mut v = Vec::new();
        for p in 1..=n {
            for q in p + 1..=n {
                v.push((p, q));
            }
        }
        v
    }

    /// Results for all pairs `(a, b)` with `a_1 = p`, `b_1 = q`, in
    /// lexicographic order.
    pub fn block(&self, p: u32, q: u32) -> Result<Vec<CylinderResult>, Error> {
        let mut out = Vec::new();
        for (ia, a) in self
            .words
            .iter()
            .enumerate()
            .filter(|(_, w)| w.first() == Some(p))
        {
            for (ib, b) in self
                .words
                .iter()
                .enumerate()
                .filter(|(_, w)| w.first() == Some(q))
            {
                out.push(self.pair(ia, a, ib, b)?);
            }
        }
        Ok(out)
    }

    fn pair(&self, ia: usize, a: &Word, ib: usize, b: &Word) -> Result<CylinderResult, Error> {
        let mut best = f64::NEG_INFINITY;
        let mut best_x = 0.0;
        for (k, &x) in self.grid.iter().enumerate() {
            let g = gap_of(self.bands[ia][k], self.bands[ib][k]);
            if g > best {
                best = g;
                best_x = x;
            }
        }
        let env = self.envelope;
        let ifs = self.ifs;
        finish_pair(ifs, a, b, &env, best_x, best, |x| {
            let ba = band_f64(&dual_value(ifs, a, x)?, &env);
            let bb = band_f64(&dual_value(ifs, b, x)?, &env);
            Ok((gap_of(ba, bb), ba, bb))
        })
    }

    /// Combine block results (in block order) into a report.
    pub fn merge(&self, blocks: Vec<Vec<CylinderResult>>) -> DualSscReport {
        let mut pairs_checked = 0;
        let mut failures = Vec::new();
        let mut min_gap: Option<(f64, (Word, Word))> = None;
        for r in blocks.into_iter().flatten() {
            pairs_checked += 1;
            if r.verdict == CylinderVerdict::Disjoint {
                if min_gap.as_ref().is_none_or(|(g, _)| r.gap < *g) {
                    min_gap = Some((r.gap, r.pair.clone()));
                }
            } else {
                failures.push(r);
            }
        }
        let verdict = if failures
            .iter()
            .any(|r| r.verdict == CylinderVerdict::Overlapping)
        {
            DualSscVerdict::Fail
        } else if failures.is_empty() {
            DualSscVerdict::Pass
        } else {
            DualSscVerdict::Inconclusive
        };
        let (min_gap, min_gap_pair) = match (failures.is_empty(), min_gap) {
            (true, Some((g, p))) => (Some(g), Some(p)),
            _ => (None, None),
        };
        let _ = &self.hints;
        DualSscReport {
            depth: self.depth,
            envelope: self.envelope,
            verdict,
            pairs_checked,
            min_gap,
            min_gap_pair,
            failures,
        }
    }

    pub fn run(&self) -> Result<DualSscReport, Error> {
        let blocks = self
            .blocks()
            .into_iter()
            .map(|(p, q)| self.block(p, q))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.merge(blocks))
    }
}

/// Depth-`n` check that all cylinders with different first letters are
/// disjoint, with the default envelope.
pub fn dual_ssc_check(ifs: &Ifs, depth: usize) -> Result<DualSscReport, Error> {
    let env = choose_envelope(ifs)?;
    DualScan::new(ifs, depth, env, &[])?.run()
}

/// Hölder bound `2 C_0 c_max^{|a ∧ b|}` on `sup |H_a - H_b|`.
pub fn holder_bound(ifs: &Ifs, a: &Word, b: &Word) -> f64 {
    let n = common_prefix(a, b).len();
    2.0 * dual_sup_bound(ifs) * libm::pow(ifs.c_max().hi(), n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn three_maps() -> Ifs {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    }

    fn moran() -> Ifs {
        Ifs::from_sources(&["x/3", "x/3 + 2/3"], 0.05).unwrap()
    }

    #[test]
    fn single_letters() {
        let s = three_maps();
        assert_eq!(h(&s, &Word::empty(), 0.4).unwrap(), 0.0);
        assert_eq!(h(&s, &Word::from([1, 1, 1]), 0.4).unwrap(), 0.0);
        assert_eq!(h(&s, &Word::from([2]), 0.0).unwrap(), 0.5);
    }

    #[test]
    fn periodic_word_geometric_series() {
        let s = three_maps();
        let w = PeriodicWord::pure(Word::from([2])).unwrap();
        let t = h_periodic(&s, &w, 0.0, 1e-12).unwrap();
        assert!((t.value - 4.0 / 7.0).abs() <= t.tail_bound + 1e-15);
        let t40 = h(&s, &Word::from([2]).repeat(40), 0.0).unwrap();
        assert_relative_eq!(t40, 4.0 / 7.0, max_relative = 1e-15);
    }

    #[test]
    fn identity_with_composed_ratio() {
        let s = three_maps();
        assert_eq!(h_identity_check(&s, &Word::from([3]), 0.7).unwrap(), 0.0);
        assert!(h_identity_check(&s, &Word::from([2, 3]), 0.0).unwrap() < 1e-12);
    }

    #[test]
    fn lifts_iterate_to_h() {
        let s = three_maps();
        let x = 0.3;
        assert_eq!(
            apply_lift(&s, 1, |_| 0.0, x).unwrap(),
            h(&s, &Word::from([2]), x).unwrap()
        );
        // F_2 F_3 0 = H_{23}
        let inner = |y: f64| h(&s, &Word::from([3]), y).unwrap();
        let v = apply_lift(&s, 1, inner, x).unwrap();
        assert_relative_eq!(
            v,
            h(&s, &Word::from([2, 3]), x).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn envelopes_verify() {
        for s in [three_maps(), moran()] {
            let e = choose_envelope(&s).unwrap();
            assert!(verify_envelope(&s, &e));
            let c0 = dual_sup_bound(&s);
            let c = s.c_max().hi();
            assert!(e.width() <= 2.0 * (c0 / (1.0 - c) + 1.0) * (1.0 + 1e-12));
            let t = tight_envelope(&s).unwrap();
            assert!(verify_envelope(&s, &t));
            assert!(t.width() <= e.width());
        }
        let t = tight_envelope(&moran()).unwrap();
        assert!(t.width() < 1e-9);
    }

    #[test]
    fn self_similar_cylinders_overlap() {
        let s = moran();
        let env = choose_envelope(&s).unwrap();
        let r = cylinders_disjoint(&s, &Word::from([1]), &Word::from([2]), &env).unwrap();
        assert_eq!(r.verdict, CylinderVerdict::Overlapping);
        let rep = dual_ssc_check(&s, 3).unwrap();
        assert_eq!(rep.verdict, DualSscVerdict::Fail);
        assert_eq!(rep.pairs_checked, 16);
    }

    #[test]
    fn narrow_envelope_separates_first_level() {
        let s = three_maps();
        let env = Envelope {
            lower: -1.0,
            upper: 1.0,
        };
        let r = cylinders_disjoint(&s, &Word::from([1]), &Word::from([3]), &env).unwrap();
        assert_eq!(r.verdict, CylinderVerdict::Disjoint);
        assert!(r.gap > 0.0);
        assert!(cylinders_disjoint(&s, &Word::from([1]), &Word::from([1]), &env).is_err());
    }

    #[test]
    fn paper_example_passes_at_some_depth() {
        let s = three_maps();
        assert_eq!(dual_ssc_check(&s, 0).unwrap().verdict, DualSscVerdict::Pass);
        let rep = dual_ssc_check(&s, 4).unwrap();
        assert_eq!(
            rep.verdict,
            DualSscVerdict::Pass,
            "{:?}",
            rep.failures.first()
        );
        assert!(rep.min_gap.unwrap() > 0.0);
    }
}
