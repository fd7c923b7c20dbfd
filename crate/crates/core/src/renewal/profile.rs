use std::f64::consts::PI;

use super::{BoundConfig, RegimeIndex};
use crate::error::{domain, Error, Result};
use crate::specialfn::{gamma_lower, integrate_with_breaks, QuadratureSpec, EULER_GAMMA};

fn quad() -> QuadratureSpec {
    QuadratureSpec {
        relative_tolerance: 1e-10,
        absolute_tolerance: 1e-300,
        max_subdivisions: 4000,
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho >= 0.0) || rho.is_infinite() {
        return domain(format!("rho must be finite and >= 0, got {rho}"));
    }
    Ok(())
}

/// I₁(ρ) = ∫₀^{1/2K} s^{2α−n/2} e^{−ρs} ds = ρ^{−a}·γ(a, ρ/2K), a = 2α − n/2 + 1.
pub fn i1(rho: f64, cfg: &BoundConfig) -> Result<f64> {
    check_rho(rho)?;
    let a = 2.0 * cfg.spec.alpha - cfg.spec.half_n() + 1.0;
    if !(a > 0.0) {
        return domain("I1 diverges unless alpha > (n-2)/4");
    }
    let w = cfg.window();
    if rho == 0.0 {
        return Ok(w.powf(a) / a);
    }
    Ok(rho.powf(-a) * gamma_lower(a, rho * w)?)
}

/// I₂(ρ) = ∫₀^{1/2K} e^{−ρs} ln²s ds, by quadrature in w = ln s.
pub fn i2(rho: f64, cfg: &BoundConfig) -> Result<f64> {
    check_rho(rho)?;
    let top = cfg.window().ln();
    let mut breaks = vec![top - 1.0, -1.0, 0.0];
    if rho > 0.0 {
        breaks.push(-rho.ln());
    }
    let r = integrate_with_breaks(
        |w| w * w * (w - rho * w.exp()).exp(),
        f64::NEG_INFINITY,
        top,
        &breaks,
        &quad(),
    )?;
    Ok(r.value)
}

/// Full-line majorant ∫₀^∞ e^{−ρs} ln²s ds = ((ln ρ + γ)² + π²/6)/ρ of I₂.
pub fn i2_majorant(rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return domain(format!("the I2 majorant needs rho > 0, got {rho}"));
    }
    let l = rho.ln() + EULER_GAMMA;
    Ok((l * l + PI * PI / 6.0) / rho)
}

/// I₃(ρ) = (1 − e^{−ρ/2K})/ρ, with limit 1/2K at ρ = 0.
pub fn i3(rho: f64, cfg: &BoundConfig) -> Result<f64> {
    check_rho(rho)?;
    let w = cfg.window();
    if rho == 0.0 {
        return Ok(w);
    }
    Ok(-(-rho * w).exp_m1() / rho)
}

/// I₄(ρ) = ∫_{1/2K}^∞ (1+Ks)^{−3/2} e^{−ρs} ds.
///
/// With 1 + Ks = (3/2)/v² the integral becomes
/// e^{−ρ/2K}·(3/K)(3/2)^{−3/2} ∫₀¹ exp(−(3ρ/2K)(v^{−2} − 1)) dv.
pub fn i4(rho: f64, cfg: &BoundConfig) -> Result<f64> {
    check_rho(rho)?;
    let k = cfg.spec.curvature;
    let pre = 3.0 / k * 1.5f64.powf(-1.5);
    if rho == 0.0 {
        return Ok(pre);
    }
    let lam = 1.5 * rho / k;
    let breaks: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|c| 1.0 - c / lam).collect();
    let r = integrate_with_breaks(
        |v| {
            if v <= 0.0 {
                0.0
            } else {
                (-lam * (1.0 / (v * v) - 1.0)).exp()
            }
        },
        0.0,
        1.0,
        &breaks,
        &quad(),
    )?;
    Ok((-rho * cfg.window()).exp() * pre * r.value)
}

/// F_i(ρ) = I_i(ρ) + I₄(ρ), where regime `i` must match α.
pub fn f_profile(i: RegimeIndex, rho: f64, cfg: &BoundConfig) -> Result<f64> {
    let actual = cfg.regime();
    if i != actual {
        return Err(Error::Regime(format!(
            "F_{} requested but alpha = {} is in regime {}",
            i.number(),
            cfg.spec.alpha,
            actual.number()
        )));
    }
    let head = match i {
        RegimeIndex::One => i1(rho, cfg)?,
        RegimeIndex::Two => i2(rho, cfg)?,
        RegimeIndex::Three => i3(rho, cfg)?,
    };
    Ok(head + i4(rho, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::NoiseSpec;
    use crate::specialfn::integrate;

    fn cfg(alpha: f64, k: f64) -> BoundConfig {
        BoundConfig::new(NoiseSpec::new(alpha, 1.0, 3, k).unwrap(), 2.0, 1.0).unwrap()
    }

    #[test]
    fn i3_values() {
        let c = cfg(1.0, 1.0);
        assert_eq!(i3(0.0, &c).unwrap(), 0.5);
        assert!((i3(1e-12, &c).unwrap() - 0.5).abs() < 1e-12);
        assert!((i3(1.0, &c).unwrap() - 0.393_469_340_287_366_6).abs() < 1e-15);
    }

    #[test]
    fn i2_at_zero_matches_antiderivative() {
        let c = cfg(0.75, 2.0);
        let a: f64 = 0.25;
        let expect = a * (a.ln().powi(2) - 2.0 * a.ln() + 2.0);
        assert!((i2(0.0, &c).unwrap() - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn i2_below_majorant() {
        let c = cfg(0.75, 1.0);
        for &rho in &[0.1, 1.0, 10.0, 1e4] {
            assert!(i2(rho, &c).unwrap() < i2_majorant(rho).unwrap());
        }
        let m = i2_majorant(1.0).unwrap();
        assert!((m - 1.978_111_990_655_945_5).abs() < 1e-12);
    }

    #[test]
    fn i1_against_direct_quadrature() {
        let c = cfg(0.6, 1.0);
        let a = 2.0 * 0.6 - 1.5;
        for &rho in &[0.0, 0.3, 7.0] {
            let direct = integrate(
                |s: f64| s.powf(a) * (-rho * s).exp(),
                0.0,
                0.5,
                &QuadratureSpec::new(1e-11, 1e-300, 4000).unwrap(),
            )
            .unwrap()
            .value;
            let v = i1(rho, &c).unwrap();
            assert!((v - direct).abs() < 1e-9 * direct, "rho={rho}: {v} vs {direct}");
        }
    }

    #[test]
    fn i4_against_direct_quadrature() {
        for &k in &[0.5, 1.0, 3.0] {
            let c = cfg(1.0, k);
            let at_zero = 2.0 / (k * 1.5f64.sqrt());
            assert!((i4(0.0, &c).unwrap() - at_zero).abs() < 1e-14 * at_zero);
            for &rho in &[0.2, 5.0, 80.0] {
                let direct = integrate(
                    |s: f64| {
                        let damp = if rho == 0.0 { 1.0 } else { (-rho * s).exp() };
                        (1.0 + k * s).powf(-1.5) * damp
                    },
                    0.5 / k,
                    f64::INFINITY,
                    &QuadratureSpec::new(1e-11, 1e-300, 4000).unwrap(),
                )
                .unwrap()
                .value;
                let v = i4(rho, &c).unwrap();
                assert!((v - direct).abs() < 1e-9 * direct, "K={k} rho={rho}: {v} vs {direct}");
            }
        }
    }

    #[test]
    fn regime_mismatch() {
        let c = cfg(1.0, 1.0);
        assert!(matches!(f_profile(RegimeIndex::One, 1.0, &c), Err(Error::Regime(_))));
    }
}
