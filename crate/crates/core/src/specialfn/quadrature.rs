//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Infinite endpoints are handled by the maps `t = a + u/(1-u)` and
//! `t = b - u/(1-u)` on `u ∈ [0, 1)`; the Kronrod nodes never touch the
//! endpoints, so integrable endpoint singularities are reached by bisection
//! only. Callers pass breakpoints to split at known kinks or singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and work limit for every integral evaluated in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-14,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(relative_tolerance: f64, absolute_tolerance: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            relative_tolerance,
            absolute_tolerance,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Tolerances used internally by the special functions.
    pub fn tight() -> Self {
        Self {
            relative_tolerance: 1e-13,
            absolute_tolerance: 1e-300,
            max_subdivisions: 4000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) || !(self.absolute_tolerance > 0.0) {
            return Err(Error::Config("quadrature tolerances must be strictly positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Config("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    fn target(&self, value: f64) -> f64 {
        self.absolute_tolerance.max(self.relative_tolerance * value.abs())
    }
}

/// Value and error estimate of an adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Finite,
    Upper(f64),
    Lower(f64),
}

impl Piece {
    #[inline]
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, u: f64) -> f64 {
        match *self {
            Piece::Finite => f(u),
            Piece::Upper(a) => {
                let w = 1.0 - u;
                jacobian(f(a + u / w), w)
            }
            Piece::Lower(b) => {
                let w = 1.0 - u;
                jacobian(f(b - u / w), w)
            }
        }
    }
}

// A vanished tail value stays zero even where w² underflows.
#[inline]
fn jacobian(v: f64, w: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v / (w * w)
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    piece: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, piece: Piece, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = piece.eval(f, center);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs_sum = (WGK[7] * fc).abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = piece.eval(f, center - dx);
        let f2 = piece.eval(f, center + dx);
        kron += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kron * half;
    let mut error = ((kron - gauss) * half).abs();
    let floor = 50.0 * f64::EPSILON * abs_sum * half.abs();
    if error < floor {
        error = floor;
    }
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    (value, error)
}

/// Integrates `f` over `[a, b]`; either endpoint may be infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<Integral> {
    integrate_with_breaks(f, a, b, &[], spec)
}

/// Integrates `f` over `[a, b]` with the range split at `breaks` first.
/// Breakpoints outside the open interval are ignored.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    spec.validate()?;
    if a.is_nan() || b.is_nan() {
        return Err(Error::Domain("NaN integration limit".into()));
    }
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    if a > b {
        let r = integrate_with_breaks(f, b, a, breaks, spec)?;
        return Ok(Integral { value: -r.value, ..r });
    }

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > a && x < b)
        .collect();
    if a.is_infinite() && b.is_infinite() && cuts.is_empty() {
        cuts.push(0.0);
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(a);
    nodes.extend(cuts);
    nodes.push(b);

    let mut pieces = Vec::new();
    let mut heap = BinaryHeap::new();
    for w in nodes.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (piece, ulo, uhi) = if lo.is_infinite() {
            (Piece::Lower(hi), 0.0, 1.0)
        } else if hi.is_infinite() {
            (Piece::Upper(lo), 0.0, 1.0)
        } else {
            (Piece::Finite, lo, hi)
        };
        let idx = pieces.len();
        pieces.push(piece);
        let (value, error) = kronrod(&f, piece, ulo, uhi);
        heap.push(Segment {
            piece: idx,
            lo: ulo,
            hi: uhi,
            value,
            error,
        });
    }

    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut err_total: f64 = heap.iter().map(|s| s.error).sum();
    let mut intervals = heap.len();

    while err_total > spec.target(total) {
        if intervals >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                estimate: total,
                error: err_total,
                intervals,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // Interval exhausted at machine resolution; keep it and stop.
            heap.push(worst);
            return Err(Error::Quadrature {
                estimate: total,
                error: err_total,
                intervals,
            });
        }
        let piece = pieces[worst.piece];
        let (v1, e1) = kronrod(&f, piece, worst.lo, mid);
        let (v2, e2) = kronrod(&f, piece, mid, worst.hi);
        heap.push(Segment {
            piece: worst.piece,
            lo: worst.lo,
            hi: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            piece: worst.piece,
            lo: mid,
            hi: worst.hi,
            value: v2,
            error: e2,
        });
        intervals += 1;
        // Re-summing avoids drift from repeated incremental updates.
        total = heap.iter().map(|s| s.value).sum();
        err_total = heap.iter().map(|s| s.error).sum();
    }

    if !total.is_finite() {
        return Err(Error::Quadrature {
            estimate: total,
            error: err_total,
            intervals,
        });
    }
    Ok(Integral {
        value: total,
        error: err_total,
        intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x, 0.0, 3.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate(|x| (-x).exp(), 1.0, f64::INFINITY, &QuadratureSpec::tight()).unwrap();
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn whole_line_gaussian() {
        let r = integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, &QuadratureSpec::tight()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity_by_bisection() {
        let spec = QuadratureSpec::new(1e-9, 1e-14, 4000).unwrap();
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let r = integrate(|x| x, 2.0, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((r.value + 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(QuadratureSpec::new(0.0, 1e-14, 10).is_err());
        assert!(QuadratureSpec::new(1e-8, 1e-14, 0).is_err());
    }

    #[test]
    fn reports_failure_when_budget_is_exhausted() {
        let spec = QuadratureSpec::new(1e-15, 1e-300, 3).unwrap();
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
