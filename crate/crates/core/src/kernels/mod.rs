//! Fractional correlation kernels G_α = Γ(α)^{-1} ∫ t^{α−1} P_t dt, their
//! closed-form lower bounds, tabulation for Monte Carlo use, and the noise
//! covariance form on radial test functions.

mod covariance;
mod table;

pub use covariance::covariance_form;
pub use table::{KernelTable, TableGrid};

use serde::{Deserialize, Serialize};

use crate::bracket::{BracketMode, KernelBracket};
use crate::error::{domain, Error, Result};
use crate::hyperbolic::HeatKernelMode;
use crate::ledger::{gbar_key, ConstantLedger, Provenance};
use crate::specialfn::{integrate_with_breaks, ln_dm_h, ln_gamma, ln_gamma_upper, neg_ei, QuadratureSpec};

pub use crate::bracket::KernelBracket as Bracket;

/// Parameters of the noise: regularity α, inverse temperature β, and the
/// model space (n, K).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub curvature: f64,
}

impl NoiseSpec {
    pub fn new(alpha: f64, beta: f64, n: usize, curvature: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return domain(format!("alpha must be positive, got {alpha}"));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return domain(format!("beta must be nonnegative, got {beta}"));
        }
        if n < 2 {
            return domain(format!("dimension must be >= 2, got {n}"));
        }
        if !(curvature > 0.0) || !curvature.is_finite() {
            return domain(format!("curvature magnitude must be positive, got {curvature}"));
        }
        Ok(Self {
            alpha,
            beta,
            n,
            curvature,
        })
    }

    pub fn dalang_ok(&self) -> bool {
        dalang_check(self.alpha, self.n)
    }

    /// Errors unless the Dalang condition holds.
    pub fn require_dalang(&self) -> Result<()> {
        if self.dalang_ok() {
            Ok(())
        } else {
            Err(Error::Dalang {
                alpha: self.alpha,
                threshold: (self.n as f64 - 2.0) / 4.0,
            })
        }
    }

    /// The same space with the kernel order replaced by `order`.
    pub fn with_order(&self, order: f64) -> Self {
        Self { alpha: order, ..*self }
    }

    /// Spec whose order is 2α, the kernel of the noise covariance.
    pub fn covariance_kernel(&self) -> Self {
        self.with_order(2.0 * self.alpha)
    }

    pub fn half_n(&self) -> f64 {
        0.5 * self.n as f64
    }

    /// Exact kernel in n = 3, otherwise the requested side of the bracket.
    pub fn default_mode(&self, ledger: &ConstantLedger, side: BracketMode) -> HeatKernelMode {
        match (self.n, side) {
            (3, _) => HeatKernelMode::ExactN3,
            (_, BracketMode::Lower) => HeatKernelMode::dm_lower(ledger),
            _ => HeatKernelMode::dm_upper(ledger),
        }
    }
}

/// Dalang-type condition α > (n−2)/4.
pub fn dalang_check(alpha: f64, n: usize) -> bool {
    alpha > (n as f64 - 2.0) / 4.0
}

/// ln of the unit-curvature heat profile F with P_t(d) = K^{n/2} F(Kt, √K d).
#[inline]
fn ln_unit_profile(mode: HeatKernelMode, n: usize, tau: f64, z: f64) -> f64 {
    match mode {
        HeatKernelMode::ExactN3 => crate::hyperbolic::ln_p1_n3(tau, z),
        HeatKernelMode::DmUpper { c_upper: c } | HeatKernelMode::DmLower { c_lower: c } => {
            c.ln() + ln_dm_h(tau, z, n).unwrap_or(f64::NEG_INFINITY)
        }
    }
}

/// ln G_α(d) for the order `spec.alpha`.
///
/// With τ = Kt and w = ln τ the time integral becomes
/// K^{n/2−α}/Γ(α) ∫ exp(αw + ln F(e^w, √K d)) dw over the real line, whose
/// integrand decays at both ends; it is split at w = ln(Kd²/4), w = 0 and the
/// located peak, and scaled by its maximum before integration.
pub fn ln_g_alpha(spec: &NoiseSpec, d: f64, mode: HeatKernelMode, quad: &QuadratureSpec) -> Result<f64> {
    mode.check(spec.n)?;
    if !(d >= 0.0) || !d.is_finite() {
        return domain(format!("kernel distance must be finite and >= 0, got {d}"));
    }
    let (alpha, n, k) = (spec.alpha, spec.n, spec.curvature);
    if d == 0.0 && alpha <= spec.half_n() {
        return Err(Error::Divergent {
            alpha,
            half_n: spec.half_n(),
        });
    }
    let z = k.sqrt() * d;
    let log_integrand = |w: f64| {
        let v = alpha * w + ln_unit_profile(mode, n, w.exp(), z);
        // e^w under- or overflows far out in either tail.
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut breaks = vec![0.0];
    if z > 0.0 {
        breaks.push((z * z / 4.0).ln());
    }
    let lo = breaks.iter().fold(-45.0f64, |m, &b| m.min(b - 5.0));
    let (mut w_peak, mut shift) = (0.0, f64::NEG_INFINITY);
    let mut w = lo;
    while w <= 12.0 {
        let v = log_integrand(w);
        if v > shift {
            shift = v;
            w_peak = w;
        }
        w += 0.25;
    }
    if !shift.is_finite() {
        return domain(format!("kernel integrand vanishes identically at d = {d}"));
    }
    breaks.push(w_peak);

    let r = integrate_with_breaks(
        |w| (log_integrand(w) - shift).exp(),
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        quad,
    )?;
    Ok(shift + r.value.ln() + (spec.half_n() - alpha) * k.ln() - ln_gamma(alpha))
}

/// G_α(d) = Γ(α)^{-1} ∫₀^∞ t^{α−1} P_t(d) dt with P_t from `mode`.
pub fn g_alpha(spec: &NoiseSpec, d: f64, mode: HeatKernelMode, quad: &QuadratureSpec) -> Result<KernelBracket> {
    let l = ln_g_alpha(spec, d, mode, quad)?;
    Ok(KernelBracket {
        value: l.exp(),
        mode: mode.bracket_mode(),
        alpha: Some(spec.alpha),
        d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LowerCase {
    Below,
    Critical,
    Above,
}

fn lower_case(alpha: f64, half_n: f64) -> LowerCase {
    if (alpha - half_n).abs() <= 1e-12 * half_n {
        LowerCase::Critical
    } else if alpha < half_n {
        LowerCase::Below
    } else {
        LowerCase::Above
    }
}

/// ln Ḡ_α(z) with constant `c`.
pub fn ln_g_alpha_lower_with(spec: &NoiseSpec, z: f64, c: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return domain(format!("lower bound requires z > 0, got {z}"));
    }
    if !(c > 0.0) {
        return domain(format!("lower-bound constant must be positive, got {c}"));
    }
    let (alpha, k) = (spec.alpha, spec.curvature);
    let m = spec.n as f64 - 1.0;
    let half_n = spec.half_n();
    let sz = k.sqrt() * z;
    let x = k * z * z / 4.0;
    let common = c.ln() - ln_gamma(alpha) - alpha * k.ln() - 0.5 * m * sz;
    Ok(match lower_case(alpha, half_n) {
        LowerCase::Below => {
            common - 0.25 * m * m - 1.5 * (2.0 + sz).ln()
                + (alpha - half_n) * x.ln()
                + ln_gamma_upper(half_n - alpha, x)?
        }
        LowerCase::Critical => {
            let e1 = if x < 700.0 {
                neg_ei(x)?.ln()
            } else {
                ln_gamma_upper(0.0, x)?
            };
            common - 0.25 * m * m - 1.5 * (2.0 + sz).ln() + e1
        }
        // Gaussian factor carries K, as in the derivation.
        LowerCase::Above => common - x - 1.5 * (1.0 + sz).ln(),
    })
}

/// Closed-form lower bound Ḡ_α(z) ≤ G_α, with the constant for this order
/// taken from the ledger.
pub fn g_alpha_lower(spec: &NoiseSpec, z: f64, ledger: &ConstantLedger) -> Result<f64> {
    ln_g_alpha_lower_with(spec, z, ledger.gbar(spec.alpha)).map(f64::exp)
}

/// Result of fitting the lower-bound constant against the exact kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbarCalibration {
    pub order: f64,
    pub constant: f64,
    /// Grid point where G/Ḡ (with unit constant) is smallest.
    pub at: f64,
}

/// Fits the lower-bound constant for `spec.alpha` as the smallest ratio
/// G_α/Ḡ_α(·; C=1) over `grid` (n = 3, exact kernel), and records it in the
/// ledger under the order-specific key.
pub fn calibrate_gbar(
    spec: &NoiseSpec,
    grid: &[f64],
    quad: &QuadratureSpec,
    ledger: &mut ConstantLedger,
) -> Result<GbarCalibration> {
    if spec.n != 3 {
        return Err(Error::Mode {
            mode: "EXACT_N3",
            n: spec.n,
        });
    }
    if grid.is_empty() {
        return domain("calibration grid is empty");
    }
    let mut best = (f64::INFINITY, grid[0]);
    for &z in grid {
        let l = ln_g_alpha(spec, z, HeatKernelMode::ExactN3, quad)? - ln_g_alpha_lower_with(spec, z, 1.0)?;
        if l < best.0 {
            best = (l, z);
        }
    }
    let constant = best.0.exp();
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0, f64::max);
    ledger.insert(
        &gbar_key(spec.alpha),
        constant,
        Provenance::Calibrated,
        &format!(
            "min of G/Gbar over {} points in [{lo}, {hi}], attained at z = {}",
            grid.len(),
            best.1
        ),
    );
    Ok(GbarCalibration {
        order: spec.alpha,
        constant,
        at: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec(alpha: f64) -> NoiseSpec {
        NoiseSpec::new(alpha, 1.0, 3, 1.0).unwrap()
    }

    #[test]
    fn dalang_threshold() {
        assert!(dalang_check(0.3, 2));
        assert!(!dalang_check(0.25, 3));
        assert!(dalang_check(0.26, 3));
    }

    #[test]
    fn newtonian_order_closed_form() {
        let q = QuadratureSpec::default();
        for &r in &[0.05, 0.5, 2.0, 8.0] {
            let g = g_alpha(&spec(1.0), r, HeatKernelMode::ExactN3, &q).unwrap().value;
            let expect = (-r).exp() / (4.0 * PI * r.sinh());
            assert!((g - expect).abs() < 1e-9 * expect, "r={r}: {g} vs {expect}");
        }
    }

    #[test]
    fn divergent_on_diagonal() {
        let q = QuadratureSpec::default();
        assert!(matches!(
            g_alpha(&spec(1.5), 0.0, HeatKernelMode::ExactN3, &q),
            Err(Error::Divergent { .. })
        ));
        let v = g_alpha(&spec(2.0), 0.0, HeatKernelMode::ExactN3, &q).unwrap().value;
        assert!((v - 1.0 / (8.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn curvature_rescaling() {
        // G^K_α(d) = K^{n/2−α} G^1_α(√K d).
        let q = QuadratureSpec::default();
        let k: f64 = 3.0;
        let a = g_alpha(&NoiseSpec::new(0.8, 1.0, 3, k).unwrap(), 0.4, HeatKernelMode::ExactN3, &q)
            .unwrap()
            .value;
        let b = g_alpha(&spec(0.8), k.sqrt() * 0.4, HeatKernelMode::ExactN3, &q).unwrap().value;
        assert!((a - k.powf(0.7) * b).abs() < 1e-9 * a);
    }

    #[test]
    fn lower_bound_rejects_nonpositive_z() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        assert!(g_alpha_lower(&spec(1.0), 0.0, &l).is_err());
        assert!(g_alpha_lower(&spec(1.0), -1.0, &l).is_err());
    }

    #[test]
    fn lower_bound_cases_decrease() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        for &a in &[0.5, 1.5, 2.5] {
            let mut prev = f64::INFINITY;
            for i in 1..60 {
                let z = 0.1 * i as f64;
                let v = g_alpha_lower(&spec(a), z, &l).unwrap();
                assert!(v > 0.0 && v < prev, "alpha={a} z={z}");
                prev = v;
            }
        }
    }

    #[test]
    fn calibration_is_recorded() {
        let mut l = ConstantLedger::for_dimension(3).unwrap();
        let grid = [0.1, 0.5, 1.0, 2.0];
        let cal = calibrate_gbar(&spec(1.0), &grid, &QuadratureSpec::default(), &mut l).unwrap();
        assert_eq!(l.gbar(1.0), cal.constant);
        assert_eq!(l.entry(&gbar_key(1.0)).unwrap().provenance, Provenance::Calibrated);
        for &z in &grid {
            let lo = g_alpha_lower(&spec(1.0), z, &l).unwrap();
            let g = g_alpha(&spec(1.0), z, HeatKernelMode::ExactN3, &QuadratureSpec::default())
                .unwrap()
                .value;
            assert!(lo <= g * (1.0 + 1e-12));
        }
    }
}
