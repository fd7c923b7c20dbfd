use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{ln_g_alpha_lower_with, NoiseSpec};
use crate::ledger::{ConstantLedger, DIRICHLET_C};
use crate::roots::golden_max;
use crate::stats::{log_log_slope, logspace};

/// Upper bound c/R² + C(n,K,R) on the first Dirichlet eigenvalue of −Δ on a
/// geodesic ball of radius R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletBound {
    pub value: f64,
    pub c_n: f64,
    /// C(n,K,R) = (n−1)²K/4 + ((n−2)²/4 + 1/4)(√K/sinh(R√K) − 1/R²).
    pub correction: f64,
}

pub fn dirichlet_eigenvalue_upper(radius: f64, n: usize, curvature: f64, ledger: &ConstantLedger) -> Result<DirichletBound> {
    if !(radius > 0.0) || !radius.is_finite() {
        return domain(format!("ball radius must be positive and finite, got {radius}"));
    }
    if !(curvature > 0.0) {
        return domain(format!("curvature magnitude must be positive, got {curvature}"));
    }
    let c_n = ledger.value(DIRICHLET_C);
    let nf = n as f64;
    let sk = curvature.sqrt();
    let bounded = sk / (radius * sk).sinh() - 1.0 / (radius * radius);
    let correction = (nf - 1.0).powi(2) * curvature / 4.0 + ((nf - 2.0).powi(2) / 4.0 + 0.25) * bounded;
    Ok(DirichletBound {
        value: c_n / (radius * radius) + correction,
        c_n,
        correction,
    })
}

/// Floor −(n−1)²K/4 of the lower Lyapunov exponent per moment order.
fn floor_rate(spec: &NoiseSpec) -> f64 {
    let m = spec.n as f64 - 1.0;
    -m * m * spec.curvature / 4.0
}

/// ln Ḡ_{2α}(r) with the ledger constant for order 2α.
fn ln_gbar(spec: &NoiseSpec, r: f64, ledger: &ConstantLedger) -> Result<f64> {
    let cov = spec.covariance_kernel();
    ln_g_alpha_lower_with(&cov, r, ledger.gbar(cov.alpha))
}

/// Q(r) = β²(p−1)Ḡ_{2α}(r) − c/r² − C(n,K,r).
pub fn q_lower(r: f64, p: u32, beta: f64, spec: &NoiseSpec, ledger: &ConstantLedger) -> Result<f64> {
    if !(r > 0.0) {
        return domain(format!("q_lower requires r > 0, got {r}"));
    }
    let b = dirichlet_eigenvalue_upper(r, spec.n, spec.curvature, ledger)?.value;
    if beta == 0.0 {
        return Ok(-b);
    }
    let g = ln_gbar(spec, r, ledger)?.exp();
    Ok(beta * beta * (p as f64 - 1.0) * g - b)
}

/// Maximizer and maximum of Q on (0, r_max].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSup {
    pub r_star: f64,
    pub value: f64,
}

const SCAN_PER_DECADE: usize = 48;

fn scan_range(spec: &NoiseSpec, r_max: f64) -> (f64, f64) {
    let sk = spec.curvature.sqrt();
    let hi = if r_max.is_finite() { r_max } else { 1e3 / sk };
    (1e-9 / sk, hi.min(1e3 / sk))
}

/// Log-grid scan of `f` on [lo, hi] followed by golden refinement between
/// the neighbours of the best grid point.
fn scan_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, per_decade: usize) -> (f64, f64) {
    let decades = (hi / lo).log10().max(0.0);
    let count = ((decades * per_decade as f64).ceil() as usize).max(2) + 1;
    let grid = logspace(lo, hi, count);
    let vals: Vec<f64> = grid.iter().map(|&r| f(r)).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] || vals[best].is_nan() {
            best = i;
        }
    }
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(grid.len() - 1)];
    // Refine in ln r, where the profile is smooth and well scaled.
    let (lr, v) = golden_max(|u| f(u.exp()), a.ln(), b.ln(), 1e-12);
    if v >= vals[best] {
        (lr.exp(), v)
    } else {
        (grid[best], vals[best])
    }
}

fn q_sup_with_density(
    p: u32,
    beta: f64,
    spec: &NoiseSpec,
    ledger: &ConstantLedger,
    r_max: f64,
    per_decade: usize,
) -> Result<QSup> {
    if !(r_max > 0.0) {
        return domain(format!("r_max must be positive, got {r_max}"));
    }
    let (lo, hi) = scan_range(spec, r_max);
    // Surface evaluation errors once, rather than inside the scan.
    q_lower(hi, p, beta, spec, ledger)?;
    let (r_star, value) = scan_max(
        |r| q_lower(r, p, beta, spec, ledger).unwrap_or(f64::NEG_INFINITY),
        lo,
        hi,
        per_decade,
    );
    Ok(QSup { r_star, value })
}

/// sup of Q over (0, r_max]; an infinite `r_max` is capped at 10³/√K.
pub fn q_sup(p: u32, beta: f64, spec: &NoiseSpec, ledger: &ConstantLedger, r_max: f64) -> Result<QSup> {
    q_sup_with_density(p, beta, spec, ledger, r_max, SCAN_PER_DECADE)
}

/// q_sup on a scan grid `factor` times denser, for refinement checks.
pub fn q_sup_refined(
    p: u32,
    beta: f64,
    spec: &NoiseSpec,
    ledger: &ConstantLedger,
    r_max: f64,
    factor: usize,
) -> Result<QSup> {
    q_sup_with_density(p, beta, spec, ledger, r_max, SCAN_PER_DECADE * factor.max(1))
}

/// Lower Lyapunov exponent p·max(sup Q, −(n−1)²K/4).
pub fn lower_exponent(p: u32, beta: f64, spec: &NoiseSpec, ledger: &ConstantLedger, r_max: f64) -> Result<f64> {
    let q = q_sup(p, beta, spec, ledger, r_max)?;
    Ok(p as f64 * q.value.max(floor_rate(spec)))
}

/// min over r of B(r)/Ḡ_{2α}(r), where B(r) = c/r² + C(n,K,r). Since Q is
/// affine in β², sup Q > 0 exactly when β²(p−1) exceeds this value.
fn critical_ratio(spec: &NoiseSpec, ledger: &ConstantLedger, r_max: f64) -> Result<f64> {
    let (lo, hi) = scan_range(spec, r_max);
    let ln_ratio = |r: f64| -> Result<f64> {
        let b = dirichlet_eigenvalue_upper(r, spec.n, spec.curvature, ledger)?.value;
        if !(b > 0.0) {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(b.ln() - ln_gbar(spec, r, ledger)?)
    };
    ln_ratio(hi)?;
    let (_, neg) = scan_max(|r| -ln_ratio(r).unwrap_or(f64::INFINITY), lo, hi, SCAN_PER_DECADE);
    Ok((-neg).exp())
}

/// Smallest β with a positive lower exponent at order p.
pub fn beta_critical(p: u32, spec: &NoiseSpec, ledger: &ConstantLedger, r_max: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::Config(format!("p must be >= 2, got {p}")));
    }
    let m = critical_ratio(spec, ledger, r_max)?;
    Ok((m / (p as f64 - 1.0)).sqrt())
}

/// Smallest integer p ≥ 2 with a positive lower exponent at β.
pub fn p_critical(beta: f64, spec: &NoiseSpec, ledger: &ConstantLedger, r_max: f64) -> Result<u32> {
    if !(beta > 0.0) {
        return domain(format!("p_critical requires beta > 0, got {beta}"));
    }
    let m = critical_ratio(spec, ledger, r_max)?;
    let need = (m / (beta * beta)).floor() + 2.0;
    if need > u32::MAX as f64 {
        return Err(Error::Regime(format!("critical order exceeds u32 at beta = {beta}")));
    }
    let mut p = (need as u32).max(2);
    // Rounding at the boundary: step until the exponent is positive.
    while lower_exponent(p, beta, spec, ledger, r_max)? <= 0.0 {
        p += 1;
    }
    while p > 2 && lower_exponent(p - 1, beta, spec, ledger, r_max)? > 0.0 {
        p -= 1;
    }
    Ok(p)
}

/// Growth regime of the lower bound: Ḡ_{2α} singular (A), logarithmic (B)
/// or bounded (C) at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GrowthCase {
    A,
    B,
    C,
}

impl GrowthCase {
    pub fn of(alpha: f64, n: usize) -> Self {
        let q = n as f64 / 4.0;
        if (alpha - q).abs() <= 1e-12 * q {
            GrowthCase::B
        } else if alpha < q {
            GrowthCase::A
        } else {
            GrowthCase::C
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SlopeAxis {
    Beta,
    P,
}

/// Fitted growth of the lower exponent along one parameter axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeReport {
    pub axis: SlopeAxis,
    pub case: GrowthCase,
    /// Parameter values: β, or p for the p axis.
    pub grid: Vec<f64>,
    /// Fit abscissa: β, or p(p−1) for the p axis.
    pub abscissa: Vec<f64>,
    pub exponents: Vec<f64>,
    pub fitted_slope: f64,
    pub slope_stderr: f64,
    /// Rate stated for this case (β axis), or 1 in p(p−1).
    pub claimed_slope: f64,
    /// Rate from balancing β²r^{4α−n} against c/r² (case A only).
    pub balance_slope: Option<f64>,
    /// Relative spread of exponent/(p(p−1)) on the p axis.
    pub spread: Option<f64>,
    /// Verdict, given only in case C.
    pub pass: Option<bool>,
}

/// Computes the lower exponent across `grid` and fits its log-log slope.
/// On the β axis `fixed` is p; on the p axis it is β and grid values are
/// rounded to integers.
pub fn asymptotic_slope_check(
    axis: SlopeAxis,
    grid: &[f64],
    fixed: f64,
    spec: &NoiseSpec,
    ledger: &ConstantLedger,
) -> Result<SlopeReport> {
    if grid.len() < 2 {
        return Err(Error::DegenerateFit("need at least two grid points".into()));
    }
    let case = GrowthCase::of(spec.alpha, spec.n);
    let (mut exps, mut abscissa) = (Vec::new(), Vec::new());
    for &g in grid {
        let (p, beta, x) = match axis {
            SlopeAxis::Beta => (fixed.round() as u32, g, g),
            SlopeAxis::P => {
                let p = g.round();
                (p as u32, fixed, p * (p - 1.0))
            }
        };
        if p < 2 {
            return Err(Error::Config(format!("p must be >= 2, got {p}")));
        }
        exps.push(lower_exponent(p, beta, spec, ledger, f64::INFINITY)?);
        abscissa.push(x);
    }
    let lo = abscissa.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = abscissa.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 {
        return Err(Error::DegenerateFit(format!("grid spans less than one decade: [{lo}, {hi}]")));
    }
    if exps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::Regime("lower exponent is not positive across the grid".into()));
    }
    let fit = log_log_slope(&abscissa, &exps).ok_or_else(|| Error::DegenerateFit("slope fit failed".into()))?;
    let n = spec.n as f64;
    let a = spec.alpha;
    let (claimed, balance) = match (axis, case) {
        (SlopeAxis::P, _) => (1.0, None),
        (SlopeAxis::Beta, GrowthCase::A) => (2.0 / (4.0 * a - n - 2.0), Some(4.0 / (4.0 * a - n + 2.0))),
        (SlopeAxis::Beta, _) => (2.0, None),
    };
    let spread = match axis {
        SlopeAxis::P => {
            let r: Vec<f64> = exps.iter().zip(&abscissa).map(|(e, x)| e / x).collect();
            let mx = r.iter().cloned().fold(0.0, f64::max);
            let mn = r.iter().cloned().fold(f64::INFINITY, f64::min);
            Some((mx - mn) / mx)
        }
        SlopeAxis::Beta => None,
    };
    let pass = match (case, axis) {
        (GrowthCase::C, SlopeAxis::Beta) => Some((fit.slope - 2.0).abs() <= 0.1),
        (GrowthCase::C, SlopeAxis::P) => spread.map(|s| s <= 0.1),
        _ => None,
    };
    Ok(SlopeReport {
        axis,
        case,
        grid: grid.to_vec(),
        abscissa,
        exponents: exps,
        fitted_slope: fit.slope,
        slope_stderr: fit.slope_stderr,
        claimed_slope: claimed,
        balance_slope: balance,
        spread,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup(alpha: f64) -> (NoiseSpec, ConstantLedger) {
        (NoiseSpec::new(alpha, 1.0, 3, 1.0).unwrap(), ConstantLedger::for_dimension(3).unwrap())
    }

    #[test]
    fn dirichlet_reference_value() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        let b = dirichlet_eigenvalue_upper(1.0, 3, 1.0, &l).unwrap();
        // j_{1/2,1} = π.
        let expect = PI * PI + 1.0 + 0.5 * (1.0 / 1f64.sinh() - 1.0);
        assert!((b.value - expect).abs() < 1e-9, "{}", b.value);
        assert!(dirichlet_eigenvalue_upper(0.0, 3, 1.0, &l).is_err());
        let far = dirichlet_eigenvalue_upper(1e4, 3, 1.0, &l).unwrap();
        assert!((far.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dirichlet_bound_decreases_in_radius() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        let vals: Vec<f64> = [0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0]
            .iter()
            .map(|&r| dirichlet_eigenvalue_upper(r, 3, 1.0, &l).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }

    #[test]
    fn q_sign_checks() {
        let (s, l) = setup(1.0);
        assert!(q_lower(1e-3, 2, 1.0, &s, &l).unwrap() < 0.0);
        assert!(q_lower(0.0, 2, 1.0, &s, &l).is_err());
        for &r in &[1e-3, 0.1, 1.0, 10.0] {
            assert!(q_lower(r, 2, 0.0, &s, &l).unwrap() < 0.0);
        }
    }

    #[test]
    fn beta_critical_contract() {
        let (s, l) = setup(1.0);
        for p in 2..=4 {
            let bc = beta_critical(p, &s, &l, f64::INFINITY).unwrap();
            assert!(q_sup(p, 1.01 * bc, &s, &l, f64::INFINITY).unwrap().value > 0.0);
            assert!(lower_exponent(p, 0.99 * bc, &s, &l, f64::INFINITY).unwrap() <= 0.0);
        }
    }

    #[test]
    fn p_critical_is_minimal() {
        let (s, l) = setup(1.0);
        let bc = beta_critical(3, &s, &l, f64::INFINITY).unwrap();
        let p = p_critical(bc * 1.001, &s, &l, f64::INFINITY).unwrap();
        assert_eq!(p, 3);
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        let (s, l) = setup(1.0);
        let r = asymptotic_slope_check(SlopeAxis::Beta, &[100.0, 200.0], 2.0, &s, &l);
        assert!(matches!(r, Err(Error::DegenerateFit(_))));
    }
}
