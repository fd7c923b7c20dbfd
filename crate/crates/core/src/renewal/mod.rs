//! Upper bounds on the moments: the renewal profiles F₁, F₂, F₃, the growth
//! rate Θ_α obtained by inverting them, semigroup decay rates and the p-th
//! moment upper Lyapunov exponent.

mod profile;

pub use profile::{f_profile, i1, i2, i2_majorant, i3, i4};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::NoiseSpec;
use crate::ledger::{self, ConstantLedger};
use crate::roots::bisect;

/// Which of the three regimes α falls in relative to n/4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeIndex {
    /// (n−2)/4 < α < n/4.
    One,
    /// α = n/4.
    Two,
    /// α > n/4.
    Three,
}

impl RegimeIndex {
    pub fn of(alpha: f64, n: usize) -> Self {
        let q = n as f64 / 4.0;
        if (alpha - q).abs() <= 1e-12 * q {
            RegimeIndex::Two
        } else if alpha < q {
            RegimeIndex::One
        } else {
            RegimeIndex::Three
        }
    }

    pub fn number(&self) -> u8 {
        match self {
            RegimeIndex::One => 1,
            RegimeIndex::Two => 2,
            RegimeIndex::Three => 3,
        }
    }
}

/// Parameters of the upper-bound pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConfig {
    pub spec: NoiseSpec,
    /// Integrability exponent of u₀, in [1, ∞]; `f64::INFINITY` for bounded data only.
    pub r: f64,
    pub c_chaos: f64,
    /// Constant of the semigroup decay estimates.
    pub c_decay: f64,
}

impl BoundConfig {
    pub fn new(spec: NoiseSpec, r: f64, c_chaos: f64) -> Result<Self> {
        spec.require_dalang()?;
        check_exponent(r)?;
        if !(c_chaos > 0.0) || !c_chaos.is_finite() {
            return domain(format!("chaos constant must be positive, got {c_chaos}"));
        }
        Ok(Self {
            spec,
            r,
            c_chaos,
            c_decay: 1.0,
        })
    }

    /// Constants taken from the ledger.
    pub fn from_ledger(spec: NoiseSpec, r: f64, ledger: &ConstantLedger) -> Result<Self> {
        let mut cfg = Self::new(spec, r, ledger.value(ledger::CHAOS_C))?;
        cfg.c_decay = ledger.value(ledger::DECAY_C);
        Ok(cfg)
    }

    pub fn regime(&self) -> RegimeIndex {
        RegimeIndex::of(self.spec.alpha, self.spec.n)
    }

    /// b = (n−1)²K / (2·max(2, r)); zero for r = ∞.
    pub fn b(&self) -> f64 {
        let m = self.spec.n as f64 - 1.0;
        if self.r.is_infinite() {
            0.0
        } else {
            m * m * self.spec.curvature / (2.0 * self.r.max(2.0))
        }
    }

    /// Half-width 1/(2K) of the short-time window.
    pub(crate) fn window(&self) -> f64 {
        0.5 / self.spec.curvature
    }
}

fn check_exponent(r: f64) -> Result<()> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::Config(format!("integrability exponent must lie in [1, inf], got {r}")));
    }
    Ok(())
}

/// Piecewise bound on the kernel-weighted heat propagator used in the chaos
/// estimates: C²·s(t) on [0, 1/2K) and C²·(1+Kt)^{−3/2} afterwards, with
/// s(t) = t^{2α−n/2}, ln²t or 1 according to the regime.
pub fn psi_upper(t: f64, cfg: &BoundConfig) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("psi_upper needs t > 0, got {t}"));
    }
    let c2 = cfg.c_chaos * cfg.c_chaos;
    let k = cfg.spec.curvature;
    if t >= cfg.window() {
        return Ok(c2 * (1.0 + k * t).powf(-1.5));
    }
    let s = match cfg.regime() {
        RegimeIndex::One => t.powf(2.0 * cfg.spec.alpha - cfg.spec.half_n()),
        RegimeIndex::Two => t.ln().powi(2),
        RegimeIndex::Three => 1.0,
    };
    Ok(c2 * s)
}

/// β below which Θ vanishes: 1/√(C·F_i(0)).
pub fn theta_threshold(cfg: &BoundConfig) -> Result<f64> {
    let f0 = f_profile(cfg.regime(), 0.0, cfg)?;
    Ok(1.0 / (cfg.c_chaos * f0).sqrt())
}

/// Θ_α(β): zero while C·β²·F_i(0) ≤ 1, otherwise the root of F_i(ρ) = 1/(Cβ²).
pub fn theta(beta: f64, cfg: &BoundConfig) -> Result<f64> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return domain(format!("beta must be finite and >= 0, got {beta}"));
    }
    let i = cfg.regime();
    let f = |rho: f64| f_profile(i, rho, cfg);
    let ln_target = -(cfg.c_chaos.ln() + 2.0 * beta.ln());
    if beta == 0.0 || f(0.0)?.ln() <= ln_target {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = cfg.spec.curvature;
    while f(hi)?.ln() > ln_target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return domain("theta bracket overflowed");
        }
    }
    let failure = std::cell::Cell::new(None::<Error>);
    let root = bisect(
        |rho| match f(rho) {
            Ok(v) => v.ln() - ln_target,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        },
        lo,
        hi,
        1e-13,
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(root),
    }
}

/// (p/2)·(Θ(√(p−1)·β) − (n−1)²K/max(2, r)).
pub fn upper_exponent(p: u32, beta: f64, cfg: &BoundConfig) -> Result<f64> {
    if p < 2 {
        return Err(Error::Config(format!("moment order p must be >= 2, got {p}")));
    }
    let th = theta(((p - 1) as f64).sqrt() * beta, cfg)?;
    Ok(0.5 * p as f64 * (th - 2.0 * cfg.b()))
}

/// Norms of the initial datum entering the semigroup decay estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialNorms {
    pub sup_norm: f64,
    pub r_norm: Option<f64>,
}

/// Bound on |P_t u₀(x)|: ‖u₀‖_∞ for r = ∞, C e^{−(n−1)²Kt/(2r)}‖u₀‖_∞ for
/// 2 ≤ r < ∞ and C e^{−(n−1)²Kt/4}‖u₀‖_∞ for 1 ≤ r ≤ 2.
pub fn semigroup_decay_bound(t: f64, r: f64, norms: &InitialNorms, cfg: &BoundConfig) -> Result<f64> {
    check_exponent(r)?;
    if !(t > 0.0) {
        return domain(format!("decay bound needs t > 0, got {t}"));
    }
    if !(norms.sup_norm >= 0.0) {
        return domain("sup norm must be nonnegative");
    }
    let m = cfg.spec.n as f64 - 1.0;
    let k = cfg.spec.curvature;
    if r.is_infinite() {
        return Ok(norms.sup_norm);
    }
    let rate = m * m * k / (2.0 * r.max(2.0));
    Ok(cfg.c_decay * (-rate * t).exp() * norms.sup_norm)
}

/// One row of a bound table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub beta: f64,
    pub p: u32,
    pub r: f64,
    pub theta: f64,
    pub upper_exponent: f64,
    pub regime: u8,
}

pub fn bound_row(beta: f64, p: u32, cfg: &BoundConfig) -> Result<BoundRow> {
    Ok(BoundRow {
        beta,
        p,
        r: cfg.r,
        theta: theta(((p.max(2) - 1) as f64).sqrt() * beta, cfg)?,
        upper_exponent: upper_exponent(p, beta, cfg)?,
        regime: cfg.regime().number(),
    })
}

/// Writes `beta,p,r,theta,upper_exponent,regime`.
pub fn write_bounds_csv<W: Write>(rows: &[BoundRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "beta,p,r,theta,upper_exponent,regime")?;
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.beta, row.p, row.r, row.theta, row.upper_exponent, row.regime
        )?;
    }
    Ok(())
}
