//! Higher derivatives of the dual projections and the constants bounding
//! them.
//!
//! With `φ_i = log |f_i'|` and `H_w = Σ_n (φ_{i_n} ∘ f_{w_{n-1}^1})'`, Faà di
//! Bruno over set partitions gives
//!
//! ```text
//! H_w^(k)(x) = Σ_{π ∈ Π_{k+1}} Σ_n φ_{i_n}^(|π|)(f_{w_{n-1}^1}(x)) (f'_{w_{n-1}^1}(x))^|π|
//!              ∏_{B ∈ π} g_{|B|-1}(H^(|B|-2)_{w_1^{n-1}}(x), ..., H_{w_1^{n-1}}(x))
//! ```
//!
//! where `g_0 = 1` and `f^(k)/f' = g_{k-1}(H^(k-2), ..., H)` for any finite
//! composition.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, EvalError};
use crate::ifs::{Ifs, System};
use crate::interval::Interval;
use crate::jet::Jet;
use crate::map::AnalyticMap;
use crate::symbolic::{compose_eval, Orientation, Word};

/// Largest derivative order of `H` supported.
pub const MAX_H_ORDER: usize = 6;

/// A partition of `{1..k}` into nonempty blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

/// All partitions of `{1..k}`, from restricted growth strings.
pub fn set_partitions(k: usize) -> Vec<SetPartition> {
    let mut out = Vec::new();
    if k == 0 {
        out.push(SetPartition { blocks: Vec::new() });
        return out;
    }
    let mut a = vec![0usize; k];
    loop {
        let nblocks = a.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nblocks];
        for (e, &b) in a.iter().enumerate() {
            blocks[b].push(e + 1);
        }
        out.push(SetPartition { blocks });
        // next restricted growth string
        let mut i = k;
        loop {
            if i <= 1 {
                return out;
            }
            i -= 1;
            let prefix_max = a[..i].iter().copied().max().unwrap_or(0);
            if a[i] <= prefix_max {
                a[i] += 1;
                for v in a.iter_mut().skip(i + 1) {
                    *v = 0;
                }
                break;
            }
        }
    }
}

/// Partitions of `{1..m}` grouped by their multiset of block sizes.
fn partition_shapes(m: usize) -> Vec<(f64, Vec<usize>)> {
    let mut shapes: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for p in set_partitions(m) {
        let mut sizes: Vec<usize> = p.blocks.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        *shapes.entry(sizes).or_insert(0.0) += 1.0;
    }
    shapes.into_iter().map(|(s, c)| (c, s)).collect()
}

/// The polynomial `g_k` as monomials `(coefficient, exponents of y_1..y_k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GkPolynomial {
    pub k: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl GkPolynomial {
    /// `g_k` from `g_1 = y_1` and
    /// `g_{k+1} = Σ_l ∂g_k/∂y_l · y_{l+1} + g_k · y_1`; `g_0 = 1`.
    pub fn new(k: usize) -> Self {
        let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        terms.insert(Vec::new(), 1.0);
        for level in 0..k {
            let width = level + 1;
            let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            for (e, &c) in &terms {
                let mut e = e.clone();
                e.resize(width, 0);
                for l in 0..level {
                    if e[l] > 0 {
                        let mut d = e.clone();
                        let coef = c * f64::from(d[l]);
                        d[l] -= 1;
                        d[l + 1] += 1;
                        *next.entry(d).or_insert(0.0) += coef;
                    }
                }
                let mut m = e.clone();
                m[0] += 1;
                *next.entry(m).or_insert(0.0) += c;
            }
            terms = next;
        }
        GkPolynomial {
            k,
            terms: terms.into_iter().map(|(e, c)| (c, e)).collect(),
        }
    }

    /// Value at `(y_1, ..., y_k)`.
    pub fn eval_ascending(&self, y: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| {
                e.iter()
                    .zip(y)
                    .fold(*c, |acc, (&p, &v)| acc * libm::pow(v, f64::from(p)))
            })
            .sum()
    }
}

/// `g_k(y_k, ..., y_1)` with arguments in the written order.
pub fn gk_eval(k: usize, inputs: &[f64]) -> Result<f64, Error> {
    if inputs.len() != k {
        return Err(Error::InvalidArgument(alloc::format!(
            "g_{k} takes {k} inputs, got {}",
            inputs.len()
        )));
    }
    let asc: Vec<f64> = inputs.iter().rev().copied().collect();
    Ok(GkPolynomial::new(k).eval_ascending(&asc))
}

/// Precomputed partition shapes and `g` polynomials up to a fixed order.
#[derive(Clone, Debug)]
pub struct FaaDiBruno {
    order: usize,
    shapes: Vec<Vec<(f64, Vec<usize>)>>,
    g: Vec<GkPolynomial>,
}

impl FaaDiBruno {
    pub fn new(order: usize) -> Result<Self, Error> {
        if order > MAX_H_ORDER {
            return Err(EvalError::OrderTooHigh(order).into());
        }
        Ok(FaaDiBruno {
            order,
            shapes: (0..=order + 1).map(partition_shapes).collect(),
            g: (0..=order).map(GkPolynomial::new).collect(),
        })
    }

    /// `H_w^(0..=order)(x)` in one pass over the letters.
    pub fn h_derivatives<S: System + ?Sized>(
        &self,
        sys: &S,
        word: &Word,
        x: f64,
    ) -> Result<Vec<f64>, Error> {
        word.check(sys.arity())?;
        let k = self.order;
        let mut hd = vec![0.0; k + 1];
        let mut y = x;
        let mut slope = 1.0;
        let mut gvals = vec![0.0; k + 2];
        let mut powers = vec![0.0; k + 2];
        for &l in word.letters() {
            let fj = sys.map_jet(l as usize - 1, &Jet::variable(y, k + 2)?)?;
            let phi = fj.shift().abs()?.ln()?;
            // g_{b-1}(H^(b-2), ..., H) of the prefix, for block sizes b.
            for b in 1..=k + 1 {
                gvals[b] = self.g[b - 1].eval_ascending(&hd[..b - 1]);
            }
            powers[0] = 1.0;
            for p in 1..=k + 1 {
                powers[p] = powers[p - 1] * slope;
            }
            let mut terms = vec![0.0; k + 2];
            for (m, t) in terms.iter_mut().enumerate().skip(1) {
                *t = self.shapes[m]
                    .iter()
                    .map(|(count, sizes)| {
                        let parts = sizes.len();
                        count
                            * phi.derivative(parts)
                            * powers[parts]
                            * sizes.iter().map(|&b| gvals[b]).product::<f64>()
                    })
                    .sum();
            }
            for (j, h) in hd.iter_mut().enumerate() {
                *h += terms[j + 1];
            }
            slope *= fj.derivative(1);
            y = fj.value();
        }
        Ok(hd)
    }
}

/// `H_w^(k)(x)`.
pub fn h_derivative<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    x: f64,
    k: usize,
) -> Result<f64, Error> {
    Ok(FaaDiBruno::new(k)?.h_derivatives(sys, word, x)?[k])
}

/// `|f^(k)/f' - g_{k-1}(H^(k-2), ..., H)|` for the reversed composition,
/// with the left side from the composed jet.
pub fn fandg_check<S: System + ?Sized>(
    sys: &S,
    word: &Word,
    x: f64,
    k: usize,
) -> Result<f64, Error> {
    if k < 2 {
        return Err(Error::InvalidArgument(alloc::format!(
            "need k >= 2, got {k}"
        )));
    }
    let j = compose_eval(sys, word, Orientation::Reversed, x, k)?.jet;
    let lhs = j.derivative(k) / j.derivative(1);
    let hd = FaaDiBruno::new(k - 2)?.h_derivatives(sys, word, x)?;
    let rhs = GkPolynomial::new(k - 1).eval_ascending(&hd);
    Ok((lhs - rhs).abs())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BoundConstants {
    /// `d[k] >= sup_i sup_x |φ_i^(k)(x)|`, index 0 unused.
    pub d: Vec<f64>,
    /// `c[k] >= sup |H_w^(k)|` over all words.
    pub c: Vec<f64>,
    /// `e[k] = sup |g_k|` over the box `∏ [-C_j, C_j]`; `e[0] = 1`.
    pub e: Vec<f64>,
    pub c_max: f64,
    pub c_min: f64,
}

fn up(v: Interval) -> f64 {
    v.hi()
}

/// Constants `D_k`, `E_k`, `C_k` for `k <= max_k`.
pub fn bound_constants(ifs: &Ifs, max_k: usize) -> Result<BoundConstants, Error> {
    if max_k > MAX_H_ORDER {
        return Err(EvalError::OrderTooHigh(max_k).into());
    }
    let unit = Interval::new(0.0, 1.0);
    let mut d = vec![0.0f64; max_k + 2];
    for (k, dk) in d.iter_mut().enumerate().skip(1) {
        for m in ifs.maps() {
            let enc = m.enclose_log_derivative(unit, k, ifs.config())?;
            *dk = (*dk).max(enc.sup_abs().hi());
        }
    }
    let cmax = ifs.c_max().hi();
    let mut c: Vec<f64> = Vec::with_capacity(max_k + 1);
    let mut e = vec![1.0];
    for k in 0..=max_k {
        // E_j for j <= k needs C_0..C_{j-1}, all known except E_k.
        if k >= 1 {
            e.push(box_sup(&GkPolynomial::new(k), &c[..k]));
        }
        let mut total = Interval::ZERO;
        for (count, sizes) in partition_shapes(k + 1) {
            let parts = sizes.len();
            let mut num = Interval::point(count) * Interval::point(d[parts]);
            for &b in &sizes {
                num = num * Interval::point(e[b - 1]);
            }
            let den = Interval::ONE - Interval::point(cmax).powi(parts as u32);
            total = total + num.checked_div(den)?;
        }
        c.push(up(total));
    }
    Ok(BoundConstants {
        d,
        c,
        e,
        c_max: cmax,
        c_min: ifs.c_min().lo(),
    })
}

// max |g| over the vertices of ∏ [-C_j, C_j], rounded up a little.
fn box_sup(g: &GkPolynomial, c: &[f64]) -> f64 {
    let k = c.len();
    let mut best: f64 = 0.0;
    let mut y = vec![0.0; k];
    for mask in 0u32..(1 << k) {
        for (j, v) in y.iter_mut().enumerate() {
            *v = if mask & (1 << j) != 0 { -c[j] } else { c[j] };
        }
        best = best.max(g.eval_ascending(&y).abs());
    }
    best * (1.0 + 1e-12)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DerivativeGapBound {
    /// `(2 + Q) sqrt(eta)`
    pub bound: f64,
    pub q: f64,
    /// Largest `|f' - g'|` seen on the grid.
    pub observed: f64,
    pub observed_sup: f64,
}

pub const GAP_GRID: usize = 1001;

/// Checks `sup |f - g| <= eta` on a grid and returns the derivative bound.
pub fn derivative_gap_bound(
    f: &AnalyticMap,
    g: &AnalyticMap,
    eta: f64,
) -> Result<DerivativeGapBound, Error> {
    if !(eta > 0.0) || 2.0 * libm::sqrt(eta) >= 1.0 {
        return Err(Error::EtaTooLarge);
    }
    let mut observed_sup: f64 = 0.0;
    let mut observed: f64 = 0.0;
    for j in 0..GAP_GRID {
        let x = j as f64 / (GAP_GRID - 1) as f64;
        let a = f.eval_jet(x, 1)?;
        let b = g.eval_jet(x, 1)?;
        observed_sup = observed_sup.max((a.value() - b.value()).abs());
        observed = observed.max((a.derivative(1) - b.derivative(1)).abs());
    }
    if observed_sup > eta {
        return Err(Error::SupExceedsEta {
            observed: observed_sup,
            eta,
        });
    }
    let unit = Interval::new(0.0, 1.0);
    let q = f
        .enclose(unit, 2)?
        .sup_abs()
        .hi()
        .max(g.enclose(unit, 2)?.sup_abs().hi());
    let bound = up((Interval::point(2.0) + Interval::point(q)) * Interval::point(eta).sqrt());
    Ok(DerivativeGapBound {
        bound,
        q,
        observed,
        observed_sup,
    })
}
