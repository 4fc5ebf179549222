//! Analytic perturbations that make the dual system strongly separated:
//! classification of bad cylinder pairs, orbit-avoiding point selection
//! and the bump `g = f * exp(phi * psi * A)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dual::{
    certified_gap, dual_value, tight_envelope, CylinderResult, CylinderVerdict, DualScan,
    DualSscReport, Envelope,
};
use crate::enclose::EncloseConfig;
use crate::error::Error;
use crate::expr::Expr;
use crate::ifs::{Ifs, System};
use crate::interval::Interval;
use crate::map::{validate_map_with, AnalyticMap};
use crate::separation::{d2_distance_with, D2Distance};
use crate::symbolic::{word_count, Word};

/// Cap on `|B_n|`.
pub const PAIR_CAP: u128 = 1_000_000;

/// `|B_n| = C(N,2) N^(2(n-1))`, pairs of depth-`n` words with `i_1 < j_1`.
pub fn pair_count(arity: usize, depth: usize) -> u128 {
    if depth == 0 || arity < 2 {
        return 0;
    }
    let n = arity as u128;
    let rest = word_count(arity, depth - 1);
    n * (n - 1) / 2 * rest.saturating_mul(rest)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PairClass {
    pub result: CylinderResult,
    pub bad: bool,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BadPairSet {
    pub depth: usize,
    pub envelope: Envelope,
    pub pairs: Vec<PairClass>,
}

impl BadPairSet {
    pub fn bad_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.bad).count()
    }
}

pub fn find_bad_pairs(ifs: &Ifs, depth: usize) -> Result<BadPairSet, Error> {
    find_bad_pairs_with(ifs, depth, tight_envelope(ifs)?)
}

/// Classify every pair of `B_n`; a pair is bad unless certified disjoint.
pub fn find_bad_pairs_with(
    ifs: &Ifs,
    depth: usize,
    envelope: Envelope,
) -> Result<BadPairSet, Error> {
    let count = pair_count(ifs.arity(), depth);
    if count > PAIR_CAP {
        return Err(Error::SizeLimit {
            count,
            cap: PAIR_CAP,
        });
    }
    let scan = DualScan::new(ifs, depth, envelope, &[])?;
    let mut pairs = Vec::with_capacity(count as usize);
    for (p, q) in scan.blocks() {
        for result in scan.block(p, q)? {
            let bad = result.verdict != CylinderVerdict::Disjoint;
            pairs.push(PairClass { result, bad });
        }
    }
    Ok(BadPairSet {
        depth,
        envelope,
        pairs,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PointChoice {
    pub pair: (Word, Word),
    pub x: f64,
    pub bad: bool,
    /// One-based generator whose bump is centred at `x`, for bad pairs.
    pub kicked: Option<usize>,
    /// True when `(F_i k)(x)` lies in the hull of the other band's ends.
    pub first_case: bool,
    /// Certified gap at `x` under the original system, for pairs that are not bad.
    pub gap: Option<f64>,
    /// `x, f_{i1}(x), f_{i2} f_{i1}(x), ...`
    pub orbit_i: Vec<f64>,
    pub orbit_j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PointAssignment {
    pub min_gap: f64,
    /// Smallest distance between two distinct orbit points.
    pub observed_gap: f64,
    pub choices: Vec<PointChoice>,
    /// Bump centres per generator, sorted.
    pub y: Vec<Vec<f64>>,
    /// Interpolation points per generator, sorted.
    pub z: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionConfig {
    pub max_trials: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { max_trials: 20_000 }
    }
}

fn orbit<S: System + ?Sized>(sys: &S, w: &Word, x: f64) -> Result<Vec<f64>, Error> {
    let mut out = Vec::with_capacity(w.len() + 1);
    let mut y = x;
    out.push(y);
    for &l in w.letters() {
        y = sys.map_value(l as usize - 1, y)?;
        out.push(y);
    }
    Ok(out)
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

struct Stream(u64);

impl Stream {
    fn next(&mut self) -> f64 {
        self.0 += 1;
        let v = 0.5 + self.0 as f64 * GOLDEN;
        v - libm::floor(v)
    }
}

// `points` is sorted.
fn nearest(points: &[f64], v: f64) -> f64 {
    let k = points.partition_point(|&p| p < v);
    let above = points.get(k).map_or(f64::INFINITY, |p| p - v);
    let below = if k > 0 {
        v - points[k - 1]
    } else {
        f64::INFINITY
    };
    above.min(below)
}

fn spread_ok(fresh: &[f64], used: &[f64], min_gap: f64) -> Result<(), String> {
    for (a, &p) in fresh.iter().enumerate() {
        if let Some(q) = fresh[a + 1..].iter().find(|&&q| (p - q).abs() < min_gap) {
            return Err(format!("orbit points {p} and {q} collide"));
        }
        if nearest(used, p) < min_gap {
            return Err(format!(
                "orbit point {p} is within {min_gap:e} of an earlier orbit"
            ));
        }
    }
    Ok(())
}

/// Pick `x_{i,j}` for every pair of `bad` and split the orbit points into
/// bump centres and interpolation points per generator.
pub fn select_points(ifs: &Ifs, bad: &BadPairSet, min_gap: f64) -> Result<PointAssignment, Error> {
    select_points_with(ifs, bad, min_gap, &SelectionConfig::default())
}

pub fn select_points_with(
    ifs: &Ifs,
    bad: &BadPairSet,
    min_gap: f64,
    cfg: &SelectionConfig,
) -> Result<PointAssignment, Error> {
    if !(min_gap > 0.0 && min_gap < 0.5) {
        return Err(Error::InvalidArgument(format!(
            "min_gap must lie in (0, 1/2), got {min_gap}"
        )));
    }
    let env = bad.envelope;
    let mut used: Vec<f64> = Vec::new();
    let mut stream = Stream(0);
    let mut choices = Vec::with_capacity(bad.pairs.len());
    let mut y: Vec<Vec<f64>> = alloc::vec![Vec::new(); ifs.arity()];
    for class in &bad.pairs {
        let (a, b) = &class.result.pair;
        let mut offsets = Vec::new();
        if !class.bad {
            offsets.push(class.result.witness_x);
            for m in 1..=50 {
                let r = f64::from(m) * min_gap;
                offsets.push(class.result.witness_x - r);
                offsets.push(class.result.witness_x + r);
            }
        }
        let mut last = String::from("no candidate tried");
        let mut chosen = None;
        let mut offs = offsets.into_iter();
        for _ in 0..cfg.max_trials {
            let x = offs.next().unwrap_or_else(|| stream.next());
            if !(x >= min_gap && x <= 1.0 - min_gap) {
                continue;
            }
            let oi = orbit(ifs, a, x)?;
            let oj = orbit(ifs, b, x)?;
            let fresh: Vec<f64> = oi.iter().chain(&oj[1..]).copied().collect();
            if let Err(why) = spread_ok(&fresh, &used, min_gap) {
                last = why;
                continue;
            }
            let choice = if class.bad {
                let da = dual_value(ifs, a, x)?;
                let db = dual_value(ifs, b, x)?;
                let ka = da.h + da.slope * env.lower;
                let (k, kk) = (db.h + db.slope * env.lower, db.h + db.slope * env.upper);
                let first_case = k.min(kk) <= ka && ka <= k.max(kk);
                let kicked = if first_case { a.first() } else { b.first() }
                    .expect("pair words are non-empty") as usize;
                if ifs.map_value(kicked - 1, x)?.abs() < 1e-9 {
                    last = format!("f_{kicked}({x}) vanishes");
                    continue;
                }
                PointChoice {
                    pair: (a.clone(), b.clone()),
                    x,
                    bad: true,
                    kicked: Some(kicked),
                    first_case,
                    gap: None,
                    orbit_i: oi,
                    orbit_j: oj,
                }
            } else {
                let g = certified_gap(ifs, a, b, x, &env)?;
                if g <= 0.0 {
                    last = format!("no certified gap at {x}");
                    continue;
                }
                PointChoice {
                    pair: (a.clone(), b.clone()),
                    x,
                    bad: false,
                    kicked: None,
                    first_case: false,
                    gap: Some(g),
                    orbit_i: oi,
                    orbit_j: oj,
                }
            };
            for &p in &fresh {
                let k = used.partition_point(|&q| q < p);
                used.insert(k, p);
            }
            if let Some(k) = choice.kicked {
                y[k - 1].push(x);
            }
            chosen = Some(choice);
            break;
        }
        match chosen {
            Some(c) => choices.push(c),
            None => {
                return Err(Error::SelectionExhausted(format!(
                    "pair ({a}, {b}) after {} trials: {last}",
                    cfg.max_trials
                )))
            }
        }
    }
    let sorted = used;
    let observed_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let mut z = Vec::with_capacity(ifs.arity());
    for ys in &mut y {
        ys.sort_by(f64::total_cmp);
        z.push(
            sorted
                .iter()
                .copied()
                .filter(|p| ys.binary_search_by(|q| q.total_cmp(p)).is_err())
                .collect(),
        );
    }
    Ok(PointAssignment {
        min_gap,
        observed_gap,
        choices,
        y,
        z,
    })
}

/// Upper limits on a width from each requirement, the smallest wins.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EtaLimits {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// `eta^(1/3)` below half the distance to the neighbouring centres.
    pub spacing: f64,
    /// `2 a_i exp(-eta^(-1/3)) < eps / M` with the unnormalized amplitude.
    pub tail: f64,
    /// Both products of `(1 + eta^(1/3)/|y_i - p|)` powers at most 2.
    pub product: f64,
}

impl EtaLimits {
    pub fn min(&self) -> f64 {
        [
            self.c1,
            self.c2,
            self.c3,
            self.c4,
            self.spacing,
            self.tail,
            self.product,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BumpSpec {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// `delta |f'(y_i)| / (2 |f(y_i)|)`: the coefficient of the bump written
    /// with normalized factors `((x - p)/(y_i - p))^k`.
    pub amplitudes: Vec<f64>,
    /// `log10 a_i` for the unnormalized amplitude.
    pub log10_a: Vec<f64>,
    pub eta: Vec<f64>,
    pub limits: Vec<EtaLimits>,
    pub halvings: u32,
    pub delta: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug)]
pub struct Bump {
    pub map: AnalyticMap,
    pub spec: BumpSpec,
}

fn balanced(mut items: Vec<Expr>, join: fn(Expr, Expr) -> Expr) -> Option<Expr> {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            next.push(match it.next() {
                Some(b) => join(a, b),
                None => a,
            });
        }
        items = next;
    }
    items.pop()
}

const CHUNK: usize = 8;

fn pow(e: Expr, n: u32) -> Expr {
    Expr::IntPow(alloc::boxed::Box::new(e), n)
}

// Term i is b_i (x - y_i)^2 prod_{p != y_i} ((x - p)/(y_i - p))^k_p
// exp(-(x - y_i)^2/eta_i). The point products are taken in chunks of
// neighbouring points shared by all terms, each chunk paired with its own
// normalizing constant and a piece of the Gaussian so that no partial
// product overflows.
fn bump_expr(f: &Expr, ys: &[f64], zs: &[f64], amps: &[f64], eta: &[f64]) -> Result<Expr, Error> {
    let mut points: Vec<(f64, u32)> = ys
        .iter()
        .map(|&p| (p, 2))
        .chain(zs.iter().map(|&p| (p, 4)))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let chunks: Vec<&[(f64, u32)]> = points.chunks(CHUNK).collect();
    let shared: Vec<Expr> = chunks
        .iter()
        .map(|c| {
            balanced(
                c.iter()
                    .map(|&(p, k)| pow(Expr::Var - Expr::Const(p), k))
                    .collect(),
                |a, b| a * b,
            )
            .expect("non-empty")
        })
        .collect();
    let pieces = chunks.len() as f64;
    let mut terms = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let gauss = (-(pow(Expr::Var - Expr::Const(y), 2) / Expr::Const(eta[i] * pieces))).exp();
        let mut factors = Vec::with_capacity(chunks.len() + 1);
        factors.push(Expr::Const(amps[i]));
        for (c, u) in chunks.iter().zip(&shared) {
            let log_norm: f64 = c
                .iter()
                .filter(|&&(p, _)| p != y)
                .map(|&(p, k)| f64::from(k) * libm::log((y - p).abs()))
                .sum();
            let norm = libm::exp(-log_norm);
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::ConstraintInfeasible(format!(
                    "normalizing constant near {y} is out of range"
                )));
            }
            factors.push(u.clone() * Expr::Const(norm) * gauss.clone());
        }
        terms.push(balanced(factors, |a, b| a * b).expect("non-empty"));
    }
    Ok(f.clone() * balanced(terms, |a, b| a + b).expect("non-empty").exp())
}

const ETA_FLOOR: f64 = 1e-300;
const MAX_HALVINGS: u32 = 200;

fn product_log(y: f64, t: f64, others: &[f64], zs: &[f64]) -> f64 {
    let s: f64 = others
        .iter()
        .map(|&p| 2.0 * libm::log1p(t / (y - p).abs()))
        .sum();
    s + zs
        .iter()
        .map(|&p| 4.0 * libm::log1p(t / (y - p).abs()))
        .sum::<f64>()
}

fn eta_limits(i: usize, ys: &[f64], zs: &[f64], amp: f64, log_a: f64, eps: f64) -> EtaLimits {
    let e = core::f64::consts::E;
    let m = ys.len() as f64;
    let q = zs.len() as f64;
    let a = 2.0 * amp;
    let sq = |v: f64| v * v;
    let c1 = 2.0 * e * sq(eps / (2.0 * m * m * (16.0 * q * q + 12.0 * q).max(1.0) * a));
    let c2 = sq(eps * libm::pow(e, 1.5) / (8.0 * m * q.max(1.0) * a * libm::pow(1.5, 1.5)));
    let c3 = sq(eps * libm::sqrt(2.0 * e) / (4.0 * m * m * m * a));
    let c4 = eps * e / (2.0 * m * m * a);
    let y = ys[i];
    let neighbour = ys
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| (p - y).abs())
        .fold(f64::INFINITY, f64::min);
    let spacing = if neighbour.is_finite() {
        0.999 * libm::pow(neighbour / 2.0, 3.0)
    } else {
        1.0
    };
    // 2 a e^{-s} < eps/M  <=>  s > ln(2 M a / eps)
    let s = (core::f64::consts::LN_2 + libm::log(m) + log_a - libm::log(eps)).max(1.0);
    let tail = 0.999 / (s * s * s);
    let others: Vec<f64> = ys
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &p)| p)
        .collect();
    let mut t = 1.0f64;
    while t > 1e-100 && product_log(y, t, &others, zs) > core::f64::consts::LN_2 {
        t /= 2.0;
    }
    EtaLimits {
        c1,
        c2,
        c3,
        c4,
        spacing,
        tail,
        product: t * t * t,
    }
}

/// Build `g = f exp(phi psi A)` agreeing with `f` to second order on `zs`
/// and to first order on `ys`, with `|g''/g' - f''/f'| >= delta` on `ys`.
pub fn build_bump(
    f: &AnalyticMap,
    ys: &[f64],
    zs: &[f64],
    delta: f64,
    eps: f64,
) -> Result<Bump, Error> {
    build_bump_with(f, ys, zs, delta, eps, &EncloseConfig::default())
}

/// As [`build_bump`], validating with the given enclosure settings.
pub fn build_bump_with(
    f: &AnalyticMap,
    ys: &[f64],
    zs: &[f64],
    delta: f64,
    eps: f64,
    cfg: &EncloseConfig,
) -> Result<Bump, Error> {
    if !(delta > 0.0 && eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "delta and eps must be positive, got {delta}, {eps}"
        )));
    }
    let mut ys = ys.to_vec();
    let mut zs = zs.to_vec();
    ys.sort_by(f64::total_cmp);
    zs.sort_by(f64::total_cmp);
    if let Some(p) = ys.iter().chain(&zs).find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!(
            "point {p} is outside [0,1]"
        )));
    }
    if ys.windows(2).any(|w| w[0] == w[1]) || zs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(String::from("repeated point")));
    }
    if let Some(p) = ys.iter().find(|p| zs.contains(p)) {
        return Err(Error::InvalidArgument(format!(
            "point {p} is in both Y and Z"
        )));
    }
    let empty_spec = |ys: Vec<f64>, zs: Vec<f64>| BumpSpec {
        y: ys,
        z: zs,
        amplitudes: Vec::new(),
        log10_a: Vec::new(),
        eta: Vec::new(),
        limits: Vec::new(),
        halvings: 0,
        delta,
        epsilon: eps,
    };
    if ys.is_empty() {
        return Ok(Bump {
            map: f.clone(),
            spec: empty_spec(ys, zs),
        });
    }
    let mut amps = Vec::with_capacity(ys.len());
    let mut log_a = Vec::with_capacity(ys.len());
    for (i, &y) in ys.iter().enumerate() {
        let j = f.eval_jet(y, 1)?;
        if j.value() == 0.0 {
            return Err(Error::ConstraintInfeasible(format!(
                "f vanishes at the centre {y}"
            )));
        }
        let b = delta * j.derivative(1).abs() / (2.0 * j.value().abs());
        let mut la = libm::log(b);
        for (k, &p) in ys.iter().enumerate() {
            if k != i {
                la -= 2.0 * libm::log((y - p).abs());
            }
        }
        for &p in &zs {
            la -= 4.0 * libm::log((y - p).abs());
        }
        amps.push(b);
        log_a.push(la);
    }
    let limits: Vec<EtaLimits> = (0..ys.len())
        .map(|i| eta_limits(i, &ys, &zs, amps[i], log_a[i], eps))
        .collect();
    let mut eta: Vec<f64> = limits.iter().map(EtaLimits::min).collect();
    let mut halvings = 0;
    let mut last_failure = String::new();
    loop {
        if eta.iter().any(|&e| e < ETA_FLOOR) || halvings > MAX_HALVINGS {
            return Err(Error::ConstraintInfeasible(format!(
                "width fell below {ETA_FLOOR:e}; last check: {last_failure}"
            )));
        }
        let expr = bump_expr(f.expr(), &ys, &zs, &amps, &eta)?;
        match AnalyticMap::with_config(expr, f.epsilon(), cfg) {
            Ok(map) => {
                let report = validate_map_with(&map, cfg);
                let failure = report
                    .failures()
                    .next()
                    .map(|c| format!("{}: {}", c.requirement, c.detail));
                match failure {
                    None => {
                        let spec = BumpSpec {
                            amplitudes: amps,
                            log10_a: log_a.iter().map(|l| l / core::f64::consts::LN_10).collect(),
                            eta,
                            limits,
                            halvings,
                            ..empty_spec(ys, zs)
                        };
                        return Ok(Bump { map, spec });
                    }
                    Some(why) => last_failure = why,
                }
            }
            Err(e) => last_failure = format!("{e}"),
        }
        for e in &mut eta {
            *e /= 2.0;
        }
        halvings += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BumpResiduals {
    /// Largest `|g - f|, |g' - f'|, |g'' - f''|` over the interpolation points.
    pub interpolation: f64,
    /// Largest `|g - f|, |g' - f'|` over the centres.
    pub centre: f64,
    /// Smallest `|g''/g' - f''/f'|` over the centres.
    pub min_kick: Option<f64>,
}

pub fn bump_residuals(
    f: &AnalyticMap,
    g: &AnalyticMap,
    ys: &[f64],
    zs: &[f64],
) -> Result<BumpResiduals, Error> {
    let mut interpolation = 0.0f64;
    for &z in zs {
        let (a, b) = (f.eval_jet(z, 2)?, g.eval_jet(z, 2)?);
        for k in 0..=2 {
            interpolation = interpolation.max((a.derivative(k) - b.derivative(k)).abs());
        }
    }
    let mut centre = 0.0f64;
    let mut min_kick: Option<f64> = None;
    for &y in ys {
        let (a, b) = (f.eval_jet(y, 2)?, g.eval_jet(y, 2)?);
        for k in 0..=1 {
            centre = centre.max((a.derivative(k) - b.derivative(k)).abs());
        }
        let kick = (b.derivative(2) / b.derivative(1) - a.derivative(2) / a.derivative(1)).abs();
        min_kick = Some(min_kick.map_or(kick, |m| m.min(kick)));
    }
    Ok(BumpResiduals {
        interpolation,
        centre,
        min_kick,
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct GeneratorReport {
    /// One-based.
    pub generator: usize,
    pub spec: BumpSpec,
    pub residuals: BumpResiduals,
    /// `sup |f|` on `[0,1]`.
    pub sup_f: f64,
    /// `2 e^eps sup|f| max_y |f'(y)/f(y)|`, zero without centres.
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RepairedGap {
    pub pair: (Word, Word),
    pub x: f64,
    /// Certified gap of the perturbed bands with the original envelope.
    pub gap: f64,
    /// Certified gap with an envelope verified for the perturbed system.
    pub gap_own_envelope: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PerturbationReport {
    pub depth: usize,
    pub delta: f64,
    pub epsilon: f64,
    pub envelope: Envelope,
    pub perturbed_envelope: Envelope,
    /// Whether `c_max^n (K - k) < delta/3`.
    pub depth_sufficient: bool,
    pub pairs: usize,
    pub bad_pairs: usize,
    pub min_point_gap: f64,
    pub observed_point_gap: f64,
    pub generators: Vec<GeneratorReport>,
    pub repaired: Vec<RepairedGap>,
    pub min_repaired_gap: Option<f64>,
    pub d2: D2Distance,
    /// Largest per-generator constant `C`.
    pub constant: f64,
    /// `C delta + eps`.
    pub d2_bound: f64,
    pub dual_ssc: DualSscReport,
}

#[derive(Clone, Debug)]
pub struct Perturbation {
    pub system: Ifs,
    pub assignment: PointAssignment,
    pub report: PerturbationReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationConfig {
    /// First orbit separation tried; halved while selection is exhausted.
    pub min_gap: f64,
    pub min_gap_floor: f64,
    pub selection: SelectionConfig,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            min_gap: 1e-3,
            min_gap_floor: 1e-8,
            selection: SelectionConfig::default(),
        }
    }
}

/// Smallest `n` with `c_max^n (K - k) < delta/3`.
pub fn minimal_depth(ifs: &Ifs, env: &Envelope, delta: f64) -> Option<usize> {
    let c = ifs.c_max().hi();
    let mut w = env.width();
    for n in 1..=200 {
        w *= c;
        if w < delta / 3.0 {
            return Some(n);
        }
    }
    None
}

/// Largest `delta` for which depth `n` suffices, up to a 1% margin.
pub fn delta_for_depth(ifs: &Ifs, env: &Envelope, depth: usize) -> f64 {
    3.03 * libm::pow(ifs.c_max().hi(), depth as f64) * env.width()
}

pub fn perturb_to_dual_ssc(
    ifs: &Ifs,
    depth: usize,
    delta: f64,
    eps: f64,
) -> Result<Perturbation, Error> {
    perturb_to_dual_ssc_with(ifs, depth, delta, eps, &PerturbationConfig::default())
}

pub fn perturb_to_dual_ssc_with(
    ifs: &Ifs,
    depth: usize,
    delta: f64,
    eps: f64,
    cfg: &PerturbationConfig,
) -> Result<Perturbation, Error> {
    let envelope = tight_envelope(ifs)?;
    let bad = find_bad_pairs_with(ifs, depth, envelope)?;
    let mut min_gap = cfg.min_gap;
    let assignment = if bad.bad_count() == 0 {
        // Nothing to repair; interpolation points are only needed around bumps.
        let empty = alloc::vec![Vec::new(); ifs.arity()];
        PointAssignment {
            min_gap,
            observed_gap: f64::INFINITY,
            choices: Vec::new(),
            y: empty.clone(),
            z: empty,
        }
    } else {
        loop {
            match select_points_with(ifs, &bad, min_gap, &cfg.selection) {
                Ok(a) => break a,
                Err(Error::SelectionExhausted(_)) if min_gap / 2.0 >= cfg.min_gap_floor => {
                    min_gap /= 2.0
                }
                Err(e) => return Err(e),
            }
        }
    };
    let mut maps = Vec::with_capacity(ifs.arity());
    let mut generators = Vec::with_capacity(ifs.arity());
    for i in 0..ifs.arity() {
        let f = ifs.map(i);
        let (ys, zs) = (&assignment.y[i], &assignment.z[i]);
        let bump = build_bump_with(f, ys, zs, delta, eps, ifs.config())?;
        let residuals = bump_residuals(f, &bump.map, ys, zs)?;
        let sup_f = f.enclose(Interval::new(0.0, 1.0), 0)?.range.mag();
        let mut worst = 0.0f64;
        for &y in ys {
            let j = f.eval_jet(y, 1)?;
            worst = worst.max((j.derivative(1) / j.value()).abs());
        }
        let constant = 2.0 * libm::exp(eps) * sup_f * worst;
        generators.push(GeneratorReport {
            generator: i + 1,
            spec: bump.spec,
            residuals,
            sup_f,
            constant,
        });
        maps.push(bump.map);
    }
    let system = Ifs::assemble(maps, *ifs.config());
    let perturbed_envelope = tight_envelope(&system)?;
    let mut repaired = Vec::new();
    for c in assignment.choices.iter().filter(|c| c.bad) {
        let (a, b) = &c.pair;
        repaired.push(RepairedGap {
            pair: c.pair.clone(),
            x: c.x,
            gap: certified_gap(&system, a, b, c.x, &envelope)?,
            gap_own_envelope: certified_gap(&system, a, b, c.x, &perturbed_envelope)?,
        });
    }
    let min_repaired_gap = repaired.iter().map(|r| r.gap).reduce(f64::min);
    let hints: Vec<f64> = assignment.choices.iter().map(|c| c.x).collect();
    let dual_ssc = DualScan::new(&system, depth, perturbed_envelope, &hints)?.run()?;
    let focus: Vec<f64> = assignment.y.iter().flatten().copied().collect();
    let d2 = d2_distance_with(ifs, &system, crate::separation::D2_GRID, &focus)?;
    let constant = generators.iter().map(|g| g.constant).fold(0.0, f64::max);
    let report = PerturbationReport {
        depth,
        delta,
        epsilon: eps,
        envelope,
        perturbed_envelope,
        depth_sufficient: libm::pow(ifs.c_max().hi(), depth as f64) * envelope.width()
            < delta / 3.0,
        pairs: bad.pairs.len(),
        bad_pairs: bad.bad_count(),
        min_point_gap: assignment.min_gap,
        observed_point_gap: assignment.observed_gap,
        generators,
        repaired,
        min_repaired_gap,
        d2,
        constant,
        d2_bound: constant * delta + eps,
        dual_ssc,
    };
    Ok(Perturbation {
        system,
        assignment,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::DualSscVerdict;
    use crate::expr::parse_expr;
    use crate::map::parse_map;

    fn thirds() -> Ifs {
        Ifs::from_sources(&["x/3", "x/3 + 1/3"], 0.05).unwrap()
    }

    #[test]
    fn pair_counts_match_enumeration() {
        let ifs = thirds();
        for n in 1..=3 {
            let bad = find_bad_pairs(&ifs, n).unwrap();
            assert_eq!(bad.pairs.len() as u128, pair_count(2, n));
        }
        assert_eq!(pair_count(3, 2), 3 * 9);
        assert_eq!(pair_count(2, 1), 1);
    }

    #[test]
    fn self_similar_pairs_are_all_bad() {
        let bad = find_bad_pairs(&thirds(), 3).unwrap();
        assert_eq!(bad.pairs.len(), 16);
        assert_eq!(bad.bad_count(), 16);
    }

    #[test]
    fn single_bad_pair_gives_one_centre() {
        let ifs = thirds();
        let bad = find_bad_pairs(&ifs, 1).unwrap();
        let a = select_points(&ifs, &bad, 1e-3).unwrap();
        assert_eq!(a.choices.len(), 1);
        assert_eq!(a.y.iter().map(Vec::len).sum::<usize>(), 1);
        let k = a.choices[0].kicked.unwrap() - 1;
        assert!(a.z[1 - k].contains(&a.choices[0].x));
        assert!(a.observed_gap >= 1e-3);
    }

    #[test]
    fn empty_centres_leave_map_unchanged() {
        let f = parse_map("x/3", 0.05).unwrap();
        let b = build_bump(&f, &[], &[0.2, 0.5], 1e-3, 1e-3).unwrap();
        assert_eq!(b.map.expr(), f.expr());
    }

    #[test]
    fn bump_interpolates_and_kicks() {
        let f = parse_map("x/3 + 1/3", 0.05).unwrap();
        let ys = [0.3, 0.71];
        let zs = [0.1, 0.5, 0.9];
        let delta = 1e-3;
        let b = build_bump(&f, &ys, &zs, delta, delta).unwrap();
        let r = bump_residuals(&f, &b.map, &ys, &zs).unwrap();
        assert!(r.interpolation <= 1e-12, "{r:?}");
        assert!(r.centre <= 1e-12, "{r:?}");
        assert!(r.min_kick.unwrap() >= delta * (1.0 - 1e-6), "{r:?}");
        let text = format!("{}", b.map.expr());
        assert_eq!(&parse_expr(&text).unwrap(), b.map.expr());
    }

    #[test]
    fn already_separated_input_is_unchanged() {
        let ifs =
            Ifs::from_sources(&["x/8", "x/8 + x^2/32", "x/16 + x^2/32 + 29/32"], 0.05).unwrap();
        let p = perturb_to_dual_ssc(&ifs, 4, 1e-3, 1e-3).unwrap();
        assert_eq!(p.report.bad_pairs, 0);
        assert_eq!(p.report.d2.value, 0.0);
        for (a, b) in ifs.maps().iter().zip(p.system.maps()) {
            assert_eq!(a.expr(), b.expr());
        }
    }

    #[test]
    fn repairs_self_similar_system() {
        let ifs = thirds();
        let delta = 1e-3;
        let p = perturb_to_dual_ssc(&ifs, 3, delta, delta).unwrap();
        let r = &p.report;
        assert_eq!(r.bad_pairs, 16);
        assert!(r.depth_sufficient);
        for g in &r.generators {
            assert!(g.residuals.interpolation <= 1e-9);
            if let Some(k) = g.residuals.min_kick {
                assert!(k >= delta * (1.0 - 1e-6));
            }
        }
        assert!(
            r.min_repaired_gap.unwrap() >= delta / 3.0 - 1e-6,
            "{:?}",
            r.min_repaired_gap
        );
        assert!(r.d2.value <= r.d2_bound);
        assert_eq!(r.dual_ssc.verdict, DualSscVerdict::Pass);
    }
}
