//! Certified range enclosures of derivatives by branch and bound.
//!
//! The lower and upper ends are refined separately. Each piece is bounded
//! by the natural interval extension intersected with the mean-value form,
//! and sample points give attained values. Refinement stops when the bound
//! is within tolerance of an attained value, so the result overestimates
//! the true range by at most the tolerance at each end.

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use crate::error::EvalError;
use crate::interval::Interval;
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncloseConfig {
    /// Allowed overestimation at each end, relative to `max(1, |value|)`.
    pub tolerance: f64,
    pub max_depth: u32,
    /// Cap on piece evaluations per end.
    pub max_evaluations: usize,
}

impl Default for EncloseConfig {
    fn default() -> Self {
        EncloseConfig {
            tolerance: 1e-8,
            max_depth: 40,
            max_evaluations: 20_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Enclosure {
    /// Certified to contain every value of the function on the domain.
    pub range: Interval,
    /// Hull of values observed at sample points; lies inside the true range
    /// up to rounding of the point evaluations.
    pub sampled: Interval,
    /// False if refinement stopped at the depth or evaluation cap before
    /// reaching the tolerance.
    pub converged: bool,
}

impl Enclosure {
    /// Certified bounds on `sup |f|`: between the largest sampled magnitude
    /// and the magnitude of the enclosure.
    pub fn sup_abs(&self) -> Interval {
        let lo = self.sampled.mag().min(self.range.mag());
        Interval::new(lo, self.range.mag())
    }

    /// Certified bounds on `inf |f|`.
    pub fn inf_abs(&self) -> Interval {
        let hi = self.sampled.mig().max(self.range.mig());
        Interval::new(self.range.mig(), hi)
    }
}

struct Piece {
    x: Interval,
    enc: Interval,
    depth: u32,
    key: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.key.total_cmp(&other.key) == Ordering::Equal
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

/// Enclose the `k`-th derivative of the function whose jet `f` computes
/// from the jet of the variable.
pub fn enclose_with<F>(
    domain: Interval,
    k: usize,
    cfg: &EncloseConfig,
    f: F,
) -> Result<Enclosure, EvalError>
where
    F: Fn(&Jet<Interval>) -> Result<Jet<Interval>, EvalError>,
{
    let point = |x: f64| -> Result<Interval, EvalError> {
        Ok(f(&Jet::variable(Interval::point(x), k)?)?.derivative(k))
    };
    // Bound on a piece; evaluation failures from overestimation give the
    // whole line so the piece gets refined.
    let bound = |x: Interval| -> Result<(Interval, Interval), EvalError> {
        let m = x.mid();
        let at_mid = point(m)?;
        let natural = f(&Jet::variable(x, k + 1)?);
        let enc = match natural {
            Ok(j) => {
                let nat = j.derivative(k);
                let mv = at_mid + j.derivative(k + 1) * (x - Interval::point(m));
                nat.intersect(&mv).unwrap_or(nat)
            }
            Err(_) => Interval::ENTIRE,
        };
        Ok((enc, at_mid))
    };

    // att_lo is at least some attained value and att_hi at most some
    // attained value, so [att_lo, att_hi] lies in the true range.
    let mut att_lo = f64::INFINITY;
    let mut att_hi = f64::NEG_INFINITY;
    fn observe(v: Interval, att_lo: &mut f64, att_hi: &mut f64) {
        *att_lo = att_lo.min(v.hi());
        *att_hi = att_hi.max(v.lo());
    }
    observe(point(domain.lo())?, &mut att_lo, &mut att_hi);
    observe(point(domain.hi())?, &mut att_lo, &mut att_hi);
    let (root_enc, root_mid) = bound(domain)?;
    observe(root_mid, &mut att_lo, &mut att_hi);

    let mut result = [0.0f64; 2];
    let mut converged = true;
    for (side, slot) in result.iter_mut().enumerate() {
        let lower = side == 0;
        let key = |enc: &Interval| if lower { -enc.lo() } else { enc.hi() };
        let mut heap = BinaryHeap::new();
        heap.push(Piece {
            x: domain,
            enc: root_enc,
            depth: 0,
            key: key(&root_enc),
        });
        let mut evals = 0usize;
        loop {
            let p = heap.pop().expect("heap holds at least one piece");
            let best = if lower { att_lo } else { att_hi };
            let edge = if lower { p.enc.lo() } else { p.enc.hi() };
            let tol = cfg.tolerance * best.abs().max(1.0);
            let close = if lower {
                edge >= best - tol
            } else {
                edge <= best + tol
            };
            if close {
                *slot = edge;
                break;
            }
            if p.depth >= cfg.max_depth || evals >= cfg.max_evaluations {
                *slot = edge;
                converged = false;
                break;
            }
            let (l, r) = p.x.split();
            for half in [l, r] {
                let (enc, mid) = bound(half)?;
                evals += 1;
                observe(mid, &mut att_lo, &mut att_hi);
                heap.push(Piece {
                    x: half,
                    enc,
                    depth: p.depth + 1,
                    key: key(&enc),
                });
            }
        }
    }
    let lo = result[0].min(att_lo);
    let hi = result[1].max(att_hi);
    let a = att_lo.min(att_hi).clamp(lo, hi);
    let b = att_hi.max(att_lo).clamp(a, hi);
    Ok(Enclosure {
        range: Interval::new(lo, hi),
        sampled: Interval::new(a, b),
        converged,
    })
}
