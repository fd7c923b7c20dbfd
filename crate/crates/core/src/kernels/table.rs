use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{ln_g_alpha, ln_g_alpha_lower_with, NoiseSpec};
use crate::bracket::BracketMode;
use crate::error::{domain, Result};
use crate::hyperbolic::HeatKernelMode;
use crate::ledger::ConstantLedger;
use crate::specialfn::QuadratureSpec;

/// Radial grid of a [`KernelTable`]: log-spaced nodes on `[d_min, d_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableGrid {
    pub d_min: f64,
    pub d_max: f64,
    pub per_decade: usize,
}

impl Default for TableGrid {
    fn default() -> Self {
        Self {
            d_min: 1e-4,
            d_max: 40.0,
            per_decade: 24,
        }
    }
}

impl TableGrid {
    pub fn nodes(&self) -> Result<Vec<f64>> {
        if !(self.d_min > 0.0) || !(self.d_max > self.d_min) || self.per_decade < 2 {
            return domain("table grid needs 0 < d_min < d_max and per_decade >= 2");
        }
        let decades = (self.d_max / self.d_min).log10();
        let count = (decades * self.per_decade as f64).ceil() as usize + 1;
        Ok(crate::stats::logspace(self.d_min, self.d_max, count))
    }
}

/// G_order (or its closed-form lower bound) tabulated on a radial grid and
/// interpolated by a monotone (Fritsch–Carlson) cubic in
/// (ln d, ln G + a·d + b·d²); the trend a·d + b·d² removes the large-d
/// decay so the interpolated curve is nearly flat there.
///
/// Beyond `d_max` ln G is extended linearly in d. Below `d_min` a bounded
/// kernel is joined linearly to its value at 0 and a singular one follows the
/// power law of the first grid interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub order: f64,
    pub n: usize,
    pub curvature: f64,
    pub mode: BracketMode,
    d: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
    trend: (f64, f64),
    at_zero: Option<f64>,
}

impl KernelTable {
    /// Tabulates G of order `spec.alpha`.
    pub fn build(spec: &NoiseSpec, mode: HeatKernelMode, grid: &TableGrid, quad: &QuadratureSpec) -> Result<Self> {
        let at_zero = if spec.alpha > spec.half_n() {
            Some(ln_g_alpha(spec, 0.0, mode, quad)?.exp())
        } else {
            None
        };
        let trend = ((spec.n as f64 - 1.0) * spec.curvature.sqrt(), 0.0);
        Self::from_log_fn(spec, mode.bracket_mode(), grid, trend, at_zero, |d| {
            ln_g_alpha(spec, d, mode, quad)
        })
    }

    /// Tabulates the closed-form lower bound of order `spec.alpha` with the
    /// ledger constant; tagged LOWER.
    pub fn lower_bound(spec: &NoiseSpec, ledger: &ConstantLedger, grid: &TableGrid) -> Result<Self> {
        let c = ledger.gbar(spec.alpha);
        let at_zero = if spec.alpha > spec.half_n() {
            Some(ln_g_alpha_lower_with(spec, f64::MIN_POSITIVE, c)?.exp())
        } else {
            None
        };
        let sk = spec.curvature.sqrt();
        let trend = (0.5 * (spec.n as f64 - 1.0) * sk, 0.25 * spec.curvature);
        Self::from_log_fn(spec, BracketMode::Lower, grid, trend, at_zero, |d| {
            ln_g_alpha_lower_with(spec, d, c)
        })
    }

    fn from_log_fn<F: Fn(f64) -> Result<f64>>(
        spec: &NoiseSpec,
        mode: BracketMode,
        grid: &TableGrid,
        trend: (f64, f64),
        at_zero: Option<f64>,
        ln_g: F,
    ) -> Result<Self> {
        let d = grid.nodes()?;
        let y = d
            .iter()
            .map(|&r| Ok(ln_g(r)? + trend.0 * r + trend.1 * r * r))
            .collect::<Result<Vec<_>>>()?;
        let x: Vec<f64> = d.iter().map(|v| v.ln()).collect();
        let slope = fritsch_carlson(&x, &y);
        Ok(Self {
            order: spec.alpha,
            n: spec.n,
            curvature: spec.curvature,
            mode,
            d,
            x,
            y,
            slope,
            trend,
            at_zero,
        })
    }

    /// Whether G diverges on the diagonal (order ≤ n/2).
    pub fn is_singular(&self) -> bool {
        self.at_zero.is_none()
    }

    pub fn value_at_zero(&self) -> Option<f64> {
        self.at_zero
    }

    pub fn d_min(&self) -> f64 {
        self.d[0]
    }

    pub fn d_max(&self) -> f64 {
        *self.d.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.d
    }

    /// Interpolated G(d); `+∞` at d = 0 for a singular kernel.
    #[inline]
    pub fn eval(&self, d: f64) -> f64 {
        let last = self.d.len() - 1;
        if d >= self.d[last] {
            let rate = (self.y[last] - self.y[last - 1]) / (self.d[last] - self.d[last - 1]);
            return (self.y[last] + rate * (d - self.d[last]) - self.trend_at(d)).exp();
        }
        if d < self.d[0] {
            return match self.at_zero {
                Some(g0) => {
                    let g1 = self.node_value(0);
                    g0 + (g1 - g0) * d / self.d[0]
                }
                None => {
                    if d <= 0.0 {
                        return f64::INFINITY;
                    }
                    let (l0, l1) = (self.node_value(0).ln(), self.node_value(1).ln());
                    let p = (l1 - l0) / (self.x[1] - self.x[0]);
                    (l0 + p * (d.ln() - self.x[0])).exp()
                }
            };
        }
        let xq = d.ln();
        let i = (self.x.partition_point(|&v| v <= xq) - 1).min(last - 1);
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let y = h00 * self.y[i] + h10 * h * self.slope[i] + h01 * self.y[i + 1] + h11 * h * self.slope[i + 1];
        (y - self.trend_at(d)).exp()
    }

    #[inline]
    fn trend_at(&self, d: f64) -> f64 {
        d * (self.trend.0 + self.trend.1 * d)
    }

    fn node_value(&self, i: usize) -> f64 {
        (self.y[i] - self.trend_at(self.d[i])).exp()
    }

    /// G(max(d, floor)) for a singular kernel, G(d) otherwise; the flag
    /// reports whether the floor was applied.
    #[inline]
    pub fn eval_floored(&self, d: f64, floor: f64) -> (f64, bool) {
        if self.at_zero.is_none() && d < floor {
            (self.eval(floor), true)
        } else {
            (self.eval(d), false)
        }
    }

    /// Largest relative deviation from direct evaluation at the geometric
    /// midpoints of the grid.
    pub fn midpoint_error(&self, spec: &NoiseSpec, mode: HeatKernelMode, quad: &QuadratureSpec) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for w in self.d.windows(2) {
            let m = (w[0] * w[1]).sqrt();
            let direct = ln_g_alpha(spec, m, mode, quad)?.exp();
            worst = worst.max((self.eval(m) - direct).abs() / direct);
        }
        Ok(worst)
    }

    /// Writes `d,value,mode,alpha,n,K` rows at the grid nodes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "d,value,mode,alpha,n,K")?;
        if let Some(g0) = self.at_zero {
            writeln!(out, "0,{g0},{},{},{},{}", self.mode.as_str(), self.order, self.n, self.curvature)?;
        }
        for (i, d) in self.d.iter().enumerate() {
            writeln!(
                out,
                "{d},{},{},{},{},{}",
                self.node_value(i),
                self.mode.as_str(),
                self.order,
                self.n,
                self.curvature
            )?;
        }
        Ok(())
    }
}

/// Node derivatives of the monotone cubic Hermite interpolant.
fn fritsch_carlson(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut m = vec![0.0; n];
    m[0] = delta[0];
    m[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        m[i] = if delta[i - 1] * delta[i] <= 0.0 {
            0.0
        } else {
            0.5 * (delta[i - 1] + delta[i])
        };
    }
    for i in 0..n - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta[i];
        let b = m[i + 1] / delta[i];
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m[i] = t * a * delta[i];
            m[i + 1] = t * b * delta[i];
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn matches_closed_form_off_grid() {
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0).unwrap();
        let t = KernelTable::build(&spec, HeatKernelMode::ExactN3, &TableGrid::default(), &QuadratureSpec::default())
            .unwrap();
        assert!(t.is_singular());
        for &r in &[3.3e-4f64, 0.0123, 0.77, 4.56, 17.2, 39.0] {
            let expect = (-r).exp() / (4.0 * PI * r.sinh());
            assert!((t.eval(r) - expect).abs() < 1e-3 * expect, "r={r}: {} vs {expect}", t.eval(r));
        }
        // Power-law extension below the grid follows 1/(4πr).
        let r = 1e-6;
        assert!((t.eval(r) * 4.0 * PI * r - 1.0).abs() < 1e-3);
        let (v, capped) = t.eval_floored(1e-5, 1e-3);
        assert!(capped && v == t.eval(1e-3));
    }

    #[test]
    fn midpoint_error_within_budget() {
        let q = QuadratureSpec::default();
        for &(order, k) in &[(0.6, 1.0), (1.0, 2.0), (1.5, 1.0), (2.0, 0.5), (3.0, 1.0)] {
            let spec = NoiseSpec::new(order, 1.0, 3, k).unwrap();
            let t = KernelTable::build(&spec, HeatKernelMode::ExactN3, &TableGrid::default(), &q).unwrap();
            let e = t.midpoint_error(&spec, HeatKernelMode::ExactN3, &q).unwrap();
            assert!(e < 1e-3, "order={order} K={k}: {e}");
        }
        let ledger = crate::ledger::ConstantLedger::for_dimension(4).unwrap();
        let spec = NoiseSpec::new(1.0, 1.0, 4, 1.0).unwrap();
        let mode = HeatKernelMode::dm_upper(&ledger);
        let t = KernelTable::build(&spec, mode, &TableGrid::default(), &q).unwrap();
        assert!(t.midpoint_error(&spec, mode, &q).unwrap() < 1e-3);
    }

    #[test]
    fn lower_bound_table_tracks_closed_form() {
        let ledger = ConstantLedger::for_dimension(3).unwrap();
        for &order in &[1.0, 1.5, 2.0] {
            let spec = NoiseSpec::new(order, 1.0, 3, 1.0).unwrap();
            let t = KernelTable::lower_bound(&spec, &ledger, &TableGrid::default()).unwrap();
            assert_eq!(t.mode, BracketMode::Lower);
            for w in t.nodes().windows(2) {
                let m = (w[0] * w[1]).sqrt();
                let direct = super::super::g_alpha_lower(&spec, m, &ledger).unwrap();
                assert!((t.eval(m) - direct).abs() < 1e-3 * direct, "order={order} d={m}");
            }
        }
    }

    #[test]
    fn bounded_kernel_has_value_at_zero() {
        let spec = NoiseSpec::new(2.0, 1.0, 3, 1.0).unwrap();
        let t = KernelTable::build(&spec, HeatKernelMode::ExactN3, &TableGrid::default(), &QuadratureSpec::default())
            .unwrap();
        assert!(!t.is_singular());
        assert!((t.eval(0.0) - 1.0 / (8.0 * PI)).abs() < 1e-10);
        let (_, capped) = t.eval_floored(0.0, 1e-3);
        assert!(!capped);
    }

    #[test]
    fn csv_layout() {
        let spec = NoiseSpec::new(2.0, 1.0, 3, 1.0).unwrap();
        let grid = TableGrid {
            d_min: 0.1,
            d_max: 1.0,
            per_decade: 4,
        };
        let t = KernelTable::build(&spec, HeatKernelMode::ExactN3, &grid, &QuadratureSpec::default()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("d,value,mode,alpha,n,K"));
        assert!(lines.next().unwrap().starts_with("0,"));
        assert!(lines.next().unwrap().ends_with(",EXACT,2,3,1"));
    }
}
