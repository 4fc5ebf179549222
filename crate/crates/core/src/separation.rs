//! Certificates and scans for exponential separation, and the `C^2`
//! distance between systems.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::enclose::{enclose_with, EncloseConfig};
use crate::error::Error;
use crate::ifs::{Ifs, System};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::map::AnalyticMap;
use crate::symbolic::{compose_value, enumerate_words, Orientation, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize),
    serde(rename_all = "SCREAMING_SNAKE_CASE")
)]
pub enum SescVerdict {
    Accept,
    RejectCriterion,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PairWitness {
    /// One-based map indices.
    pub i: usize,
    pub j: usize,
    pub x: f64,
    /// Certified lower bound on `|f_i''/f_i'(x) - f_j''/f_j'(x)|`.
    pub lower: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SescCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub c_max: Interval,
    pub c_min: Interval,
    pub witnesses: Vec<PairWitness>,
    /// Lower bound on `alpha - 2 beta c_max / (1 - c_max)`.
    pub margin: f64,
    /// Floating estimate of the same quantity.
    pub margin_estimate: f64,
    pub verdict: SescVerdict,
    pub reason: Option<String>,
}

pub const ALPHA_GRID: usize = 65;
const ALPHA_ROUNDS: usize = 30;

fn ratio_point(m: &AnalyticMap, x: f64) -> Result<Interval, Error> {
    let j = m.jet(&Jet::variable(Interval::point(x), 2)?)?;
    Ok(j.derivative(2).checked_div(j.derivative(1))?)
}

fn ratio_f64(m: &AnalyticMap, x: f64) -> Result<f64, Error> {
    let j = m.eval_jet(x, 2)?;
    Ok(j.derivative(2) / j.derivative(1))
}

/// Certified lower bound of `|r_i(x) - r_j(x)|` at a point.
fn pair_lower(a: &AnalyticMap, b: &AnalyticMap, x: f64) -> Result<f64, Error> {
    Ok((ratio_point(a, x)? - ratio_point(b, x)?).mig())
}

/// Best witness for one pair: grid of `grid` points, then trisection
/// refinement around the best point.
pub fn pair_witness(ifs: &Ifs, i: usize, j: usize, grid: usize) -> Result<PairWitness, Error> {
    let (a, b) = (ifs.map(i), ifs.map(j));
    let diff = |x: f64| -> Result<f64, Error> { Ok((ratio_f64(a, x)? - ratio_f64(b, x)?).abs()) };
    let grid = grid.max(2);
    let mut best_x = 0.0;
    let mut best = f64::NEG_INFINITY;
    for k in 0..grid {
        let x = k as f64 / (grid - 1) as f64;
        let v = diff(x)?;
        if v > best {
            best = v;
            best_x = x;
        }
    }
    let mut r = 1.0 / (grid - 1) as f64;
    for _ in 0..ALPHA_ROUNDS {
        r /= 3.0;
        let c = best_x;
        for x in [c - r, c + r] {
            if (0.0..=1.0).contains(&x) {
                let v = diff(x)?;
                if v > best {
                    best = v;
                    best_x = x;
                }
            }
        }
    }
    // The grid point itself may certify better than the refined one.
    let mut lower = pair_lower(a, b, best_x)?;
    for k in 0..grid {
        let x = k as f64 / (grid - 1) as f64;
        let l = pair_lower(a, b, x)?;
        if l > lower {
            lower = l;
            best_x = x;
        }
    }
    Ok(PairWitness {
        i: i + 1,
        j: j + 1,
        x: best_x,
        lower,
    })
}

/// Sufficient criterion: `alpha > 2 beta c_max / (1 - c_max)` with `alpha`
/// a pairwise separation of `f''/f'` at witness points and `beta` the sup
/// of `|f''/f'|`.
pub fn sesc_certify(ifs: &Ifs) -> Result<SescCertificate, Error> {
    sesc_certify_with(ifs, ALPHA_GRID)
}

pub fn sesc_certify_with(ifs: &Ifs, grid: usize) -> Result<SescCertificate, Error> {
    let n = ifs.arity();
    if n < 2 {
        return Err(Error::InvalidArgument(String::from(
            "the criterion needs at least two maps",
        )));
    }
    let mut witnesses = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            witnesses.push(pair_witness(ifs, i, j, grid)?);
        }
    }
    let alpha = witnesses
        .iter()
        .map(|w| w.lower)
        .fold(f64::INFINITY, f64::min);
    let beta = ifs.beta().hi();
    let c = ifs.c_max();
    let cmax = Interval::point(c.hi());
    let penalty =
        (Interval::point(2.0) * Interval::point(beta) * cmax).checked_div(Interval::ONE - cmax)?;
    let margin = (Interval::point(alpha) - penalty).lo();
    let est_alpha = witnesses
        .iter()
        .map(|w| Ok((ratio_f64(ifs.map(w.i - 1), w.x)? - ratio_f64(ifs.map(w.j - 1), w.x)?).abs()))
        .collect::<Result<Vec<f64>, Error>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let cm = c.mid();
    let margin_estimate = est_alpha - 2.0 * ifs.beta().mid() * cm / (1.0 - cm);
    let (verdict, reason) = if beta == 0.0 {
        (
            SescVerdict::RejectCriterion,
            Some(String::from("beta_zero")),
        )
    } else if est_alpha == 0.0 {
        (
            SescVerdict::RejectCriterion,
            Some(String::from("alpha_zero")),
        )
    } else if margin > 0.0 {
        (SescVerdict::Accept, None)
    } else if margin_estimate <= 0.0 {
        (
            SescVerdict::RejectCriterion,
            Some(String::from("margin_not_positive")),
        )
    } else {
        (
            SescVerdict::Inconclusive,
            Some(String::from("enclosures_too_wide")),
        )
    };
    Ok(SescCertificate {
        alpha,
        beta,
        c_max: c,
        c_min: ifs.c_min(),
        witnesses,
        margin,
        margin_estimate,
        verdict,
        reason,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeparationRow {
    pub depth: usize,
    /// Smallest grid sup of `|f_a - f_b|` over distinct words of this length.
    pub delta: f64,
    /// `delta` plus the Lipschitz slack `c_max^n h`.
    pub delta_upper: f64,
    pub log_delta_over_n: f64,
    pub pairs_scanned: u64,
    pub witness_i: Word,
    pub witness_j: Word,
    /// Reported when `delta < 1e-13 (1 + n)`; a numerical statement only.
    pub exact_overlap: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SeparationSeries {
    pub grid: usize,
    pub rows: Vec<SeparationRow>,
    /// `min_n delta_n^(1/n)`.
    pub c_emp: f64,
}

pub fn overlap_threshold(n: usize) -> f64 {
    1e-13 * (1.0 + n as f64)
}

/// Scan one depth.
pub fn separation_row<S: System + ?Sized>(
    sys: &S,
    depth: usize,
    grid: usize,
) -> Result<SeparationRow, Error> {
    let grid = grid.max(2);
    let xs: Vec<f64> = (0..grid).map(|k| k as f64 / (grid - 1) as f64).collect();
    let words: Vec<Word> = enumerate_words(sys.arity(), depth)?.collect();
    let mut values = Vec::with_capacity(words.len());
    for w in &words {
        let row = xs
            .iter()
            .map(|&x| compose_value(sys, w, Orientation::Forward, x))
            .collect::<Result<Vec<_>, _>>()?;
        values.push(row);
    }
    let mut delta = f64::INFINITY;
    let mut wit = (Word::empty(), Word::empty());
    let mut pairs = 0u64;
    for a in 0..words.len() {
        for b in a + 1..words.len() {
            pairs += 1;
            let mut sup: f64 = 0.0;
            for (u, v) in values[a].iter().zip(&values[b]) {
                sup = sup.max((u - v).abs());
                if sup >= delta {
                    break;
                }
            }
            if sup < delta {
                delta = sup;
                wit = (words[a].clone(), words[b].clone());
            }
        }
    }
    let h = 1.0 / (grid - 1) as f64;
    let slack = libm::pow(sys.contraction_bound(), depth as f64) * h;
    Ok(SeparationRow {
        depth,
        delta,
        delta_upper: delta + slack,
        log_delta_over_n: libm::log(delta) / depth as f64,
        pairs_scanned: pairs,
        witness_i: wit.0,
        witness_j: wit.1,
        exact_overlap: delta < overlap_threshold(depth),
    })
}

pub fn separation_scan<S: System + ?Sized>(
    sys: &S,
    max_depth: usize,
    grid: usize,
) -> Result<SeparationSeries, Error> {
    let rows = (1..=max_depth)
        .map(|n| separation_row(sys, n, grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(series_from_rows(grid, rows))
}

pub fn series_from_rows(grid: usize, rows: Vec<SeparationRow>) -> SeparationSeries {
    let c_emp = rows
        .iter()
        .map(|r| libm::pow(r.delta, 1.0 / r.depth as f64))
        .fold(f64::INFINITY, f64::min);
    SeparationSeries { grid, rows, c_emp }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct D2Distance {
    /// Sampled `max_i (sup|f-g| + sup|f'-g'| + sup|f''-g''|)`.
    pub value: f64,
    /// `value` plus grid slack from enclosures of the next derivatives.
    pub upper: f64,
    /// One-based index of the map attaining `value`.
    pub map: usize,
    pub grid: usize,
}

pub const D2_GRID: usize = 2049;

pub fn d2_distance(phi: &Ifs, psi: &Ifs) -> Result<D2Distance, Error> {
    d2_distance_with(phi, psi, D2_GRID, &[])
}

/// As [`d2_distance`], also sampling densely around the `focus` points.
pub fn d2_distance_with(
    phi: &Ifs,
    psi: &Ifs,
    grid: usize,
    focus: &[f64],
) -> Result<D2Distance, Error> {
    if phi.arity() != psi.arity() {
        return Err(Error::ArityMismatch(phi.arity(), psi.arity()));
    }
    let grid = grid.max(2);
    let mut xs: Vec<f64> = (0..grid).map(|k| k as f64 / (grid - 1) as f64).collect();
    for &p in focus {
        for s in [1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3] {
            for t in -8i32..=8 {
                let x = p + f64::from(t) * s;
                if (0.0..=1.0).contains(&x) {
                    xs.push(x);
                }
            }
        }
    }
    let h = 1.0 / (grid - 1) as f64;
    let loose = EncloseConfig {
        tolerance: 1e-3,
        max_depth: 30,
        max_evaluations: 300,
    };
    let unit = Interval::new(0.0, 1.0);
    let mut best = (0.0, 0.0, 1);
    for i in 0..phi.arity() {
        let (f, g) = (phi.map(i), psi.map(i));
        let mut sups = [0.0f64; 3];
        for &x in &xs {
            let a = f.eval_jet(x, 2)?;
            let b = g.eval_jet(x, 2)?;
            for (k, s) in sups.iter_mut().enumerate() {
                *s = s.max((a.derivative(k) - b.derivative(k)).abs());
            }
        }
        let value: f64 = sups.iter().sum();
        let mut slack = 0.0;
        for k in 1..=3 {
            let enc = enclose_with(unit, k, &loose, |j| Ok(f.jet(j)? - g.jet(j)?));
            slack += match enc {
                Ok(e) => e.sup_abs().hi() * h / 2.0,
                Err(_) => f64::INFINITY,
            };
        }
        if value > best.0 || i == 0 {
            best = (value, value + slack, i + 1);
        }
    }
    Ok(D2Distance {
        value: best.0,
        upper: best.1,
        map: best.2,
        grid,
    })
}

/// The constant `C'` with `|H_w^Φ - H_w^Ψ| <= C' d_2(Φ, Ψ)` for systems
/// close to `Φ`.
pub fn stability_constant(ifs: &Ifs) -> Result<f64, Error> {
    let unit = Interval::new(0.0, 1.0);
    let cfg = ifs.config();
    let mut c: f64 = 0.0;
    for m in ifs.maps() {
        c = c.max(m.enclose(unit, 2)?.sup_abs().hi());
        c = c.max(m.ratio_bounds().map_or(0.0, |r| r.sup_abs().hi()));
        // (f''' f' - f'') / f'
        let e = enclose_with(unit, 0, cfg, |v| {
            let r = v.order();
            let w = Jet::variable(v.value(), r + 3)?;
            let f1 = m.jet(&w)?.shift();
            let f2 = f1.shift();
            let f3 = f2.shift().truncate(r);
            let num = f3.product(&f1.truncate(r)) - f2.truncate(r);
            num.checked_div(&f1.truncate(r))
        })?;
        c = c.max(e.sup_abs().hi());
    }
    let cmax = Interval::point(ifs.c_max().hi());
    let cmin = Interval::point(ifs.c_min().lo());
    let cc = Interval::point(c);
    let one = Interval::ONE;
    let k1 =
        (cc * (cc + one) + cc).checked_div(one - cmax)? + (cmax + cc).checked_div(cmin * cmin)?;
    Ok(k1.checked_div(one - cmax)?.hi())
}

/// Values of `f_w` on a grid, for pairs scans elsewhere.
pub fn grid_values<S: System + ?Sized>(sys: &S, w: &Word, grid: usize) -> Result<Vec<f64>, Error> {
    let mut out = vec![0.0; grid];
    for (k, v) in out.iter_mut().enumerate() {
        *v = compose_value(sys, w, Orientation::Forward, k as f64 / (grid - 1) as f64)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_maps() -> Ifs {
        Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap()
    }

    #[test]
    fn three_map_certificate() {
        let c = sesc_certify(&three_maps()).unwrap();
        assert_eq!(c.verdict, SescVerdict::Accept);
        assert!(c.c_max.contains(3.0 / 16.0) && c.c_max.width() <= 1e-9);
        assert!(c.beta <= 1.0 + 1e-9);
        assert!(c.alpha >= 0.5 - 1e-9);
        assert!(c.margin >= 1.0 / 26.0 - 1e-6, "{}", c.margin);
    }

    #[test]
    fn rejections() {
        let s = Ifs::from_sources(&["x/3", "x/3 + 2/3"], 0.05).unwrap();
        let c = sesc_certify(&s).unwrap();
        assert_eq!(c.verdict, SescVerdict::RejectCriterion);
        assert_eq!(c.reason.as_deref(), Some("beta_zero"));
        let s = Ifs::from_sources(&["x/8 + x^2/32", "x/8 + x^2/32", "x/3 + 2/3"], 0.05).unwrap();
        let c = sesc_certify(&s).unwrap();
        assert_eq!(c.alpha, 0.0);
        assert_eq!(c.verdict, SescVerdict::RejectCriterion);
    }

    #[test]
    fn first_level_gap_is_image_gap() {
        let s = Ifs::from_sources(&["x/4", "x/4 + 3/4"], 0.05).unwrap();
        let r = separation_row(&s, 1, 33).unwrap();
        assert!((r.delta - 0.75).abs() < 1e-15);
    }

    #[test]
    fn exact_overlap_detected() {
        let s = Ifs::from_sources(
            &[
                "x/8",
                "x/8 + x^2/32",
                "(x/8 + x^2/32)/8 + (x/8 + x^2/32)^2/32",
            ],
            0.05,
        )
        .unwrap();
        let r = separation_row(&s, 2, 65).unwrap();
        assert!(r.exact_overlap);
        assert!(!separation_row(&s, 1, 65).unwrap().exact_overlap);
    }

    #[test]
    fn d2_of_shift() {
        let a = Ifs::from_sources(&["x/3", "x/3 + 1/2"], 0.05).unwrap();
        let b = Ifs::from_sources(&["x/3 + 0.01", "x/3 + 1/2"], 0.05).unwrap();
        assert_eq!(d2_distance(&a, &a).unwrap().value, 0.0);
        let d = d2_distance(&a, &b).unwrap();
        assert!((d.value - 0.01).abs() < 1e-15);
        let c = Ifs::from_sources(&["x/3"], 0.05).unwrap();
        assert_eq!(d2_distance(&a, &c), Err(Error::ArityMismatch(2, 1)));
    }

    #[test]
    fn stability_constant_is_finite() {
        let c = stability_constant(&three_maps()).unwrap();
        assert!(c.is_finite() && c > 0.0);
    }
}
