//! A quick self-check suite over every module, sized to run in seconds.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fkmc::{beta_critical, moment_estimate, FkConfig};
use crate::hyperbolic::{brownian_path, distance, ln_heat_kernel, HeatKernelMode, ModelPoint, PathSeed};
use crate::kernels::{calibrate_gbar, g_alpha_lower, ln_g_alpha, NoiseSpec};
use crate::ledger::ConstantLedger;
use crate::renewal::{f_profile, theta, upper_exponent, BoundConfig};
use crate::specialfn::{gamma, gamma_lower, gamma_upper, integrate, QuadratureSpec};
use crate::stats::{log_log_slope, logspace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check {
            name: name.into(),
            passed,
            detail,
        },
        Err(e) => Check {
            name: name.into(),
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Runs the suite with `workers` threads for the Monte Carlo checks.
pub fn quick_suite(workers: usize) -> Vec<Check> {
    let quad = QuadratureSpec::default();
    let mut out = Vec::new();

    out.push(check("gamma additivity", || {
        let mut worst: f64 = 0.0;
        for &s in &[0.5, 1.0, 1.5, 2.5] {
            for x in logspace(1e-4, 20.0, 25) {
                let g = gamma(s);
                worst = worst.max((gamma_lower(s, x)? + gamma_upper(s, x)? - g).abs() / g);
            }
        }
        Ok((worst <= 1e-10, format!("max relative defect {worst:.2e}")))
    }));

    out.push(check("minkowski drift along a path", || {
        let o = ModelPoint::basepoint(3, 1.0)?;
        let path = brownian_path(&o, 5.0, 0.01, PathSeed::new(1, 0))?;
        let worst = path
            .points
            .iter()
            .map(|p| p.minkowski_residual().abs())
            .fold(0.0, f64::max);
        Ok((worst <= 1e-9, format!("max residual {worst:.2e}")))
    }));

    out.push(check("triangle inequality", || {
        let o = ModelPoint::basepoint(3, 1.0)?;
        let pts: Vec<ModelPoint> = (0..30)
            .map(|i| brownian_path(&o, 1.0, 0.05, PathSeed::new(2, i)).map(|p| p.end().clone()))
            .collect::<Result<_>>()?;
        let mut worst = f64::NEG_INFINITY;
        for a in &pts {
            for b in &pts {
                for c in pts.iter().take(10) {
                    worst = worst.max(distance(a, c)? - distance(a, b)? - distance(b, c)?);
                }
            }
        }
        Ok((worst <= 1e-9, format!("max violation {worst:.2e}")))
    }));

    out.push(check("heat kernel mass", || {
        let mass = integrate(
            |r| {
                let l = ln_heat_kernel(1.0, r, 3, 1.0, HeatKernelMode::ExactN3).unwrap_or(f64::NEG_INFINITY);
                4.0 * std::f64::consts::PI * r.sinh().powi(2) * l.exp()
            },
            0.0,
            60.0,
            &quad,
        )?
        .value;
        Ok(((mass - 1.0).abs() <= 1e-6, format!("mass {mass:.9}")))
    }));

    out.push(check("kernel small-distance slope", || {
        let spec = NoiseSpec::new(0.5, 1.0, 3, 1.0)?;
        let d = logspace(1e-3, 1e-2, 6);
        let g: Vec<f64> = d
            .iter()
            .map(|&x| ln_g_alpha(&spec, x, HeatKernelMode::ExactN3, &quad).map(f64::exp))
            .collect::<Result<_>>()?;
        let s = log_log_slope(&d, &g).map(|f| f.slope).unwrap_or(f64::NAN);
        Ok(((s + 2.0).abs() <= 0.1, format!("slope {s:.4} (expected -2)")))
    }));

    out.push(check("calibrated lower kernel below exact", || {
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0)?;
        let mut ledger = ConstantLedger::for_dimension(3)?;
        let grid = logspace(1e-2, 10.0, 20);
        calibrate_gbar(&spec, &grid, &quad, &mut ledger)?;
        let mut worst: f64 = 0.0;
        for &z in &grid {
            let exact = ln_g_alpha(&spec, z, HeatKernelMode::ExactN3, &quad)?.exp();
            worst = worst.max(g_alpha_lower(&spec, z, &ledger)? / exact);
        }
        Ok((worst <= 1.0 + 1e-9, format!("max lower/exact {worst:.6}")))
    }));

    out.push(check("theta round trip", || {
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0)?;
        let cfg = BoundConfig::new(spec, 2.0, 1.0)?;
        let beta = 5.0;
        let th = theta(beta, &cfg)?;
        let rt = f_profile(cfg.regime(), th, &cfg)? * beta * beta;
        Ok(((rt - 1.0).abs() <= 1e-6, format!("F(theta)·C·beta² = {rt:.10}")))
    }));

    out.push(check("upper exponent below threshold", || {
        let spec = NoiseSpec::new(1.0, 0.1, 3, 1.0)?;
        let cfg = BoundConfig::new(spec, 2.0, 1.0)?;
        let u = upper_exponent(2, 0.1, &cfg)?;
        Ok((u == -2.0, format!("{u}")))
    }));

    out.push(check("critical beta nonincreasing in p", || {
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0)?;
        let ledger = ConstantLedger::for_dimension(3)?;
        let b: Vec<f64> = (2..=8)
            .map(|p| beta_critical(p, &spec, &ledger, f64::INFINITY))
            .collect::<Result<_>>()?;
        Ok((b.windows(2).all(|w| w[1] <= w[0]), format!("beta_c(2..8) = {b:.3?}")))
    }));

    out.push(check("Feynman-Kac at beta = 0", || {
        let spec = NoiseSpec::new(1.0, 0.0, 3, 1.0)?;
        let ledger = ConstantLedger::for_dimension(3)?;
        let mut cfg = FkConfig::new(spec, 2, 0.2, 0.01, 512, 1);
        cfg.workers = workers;
        let e = moment_estimate(&cfg, &ledger)?;
        Ok((e.mean == 1.0 && e.stderr == 0.0, format!("mean {} stderr {}", e.mean, e.stderr)))
    }));

    out.push(check("worker-count invariance", || {
        let spec = NoiseSpec::new(1.0, 2.0, 3, 1.0)?;
        let ledger = ConstantLedger::for_dimension(3)?;
        let mut cfg = FkConfig::new(spec, 2, 0.2, 0.01, 1024, 3);
        let a = moment_estimate(&cfg, &ledger)?;
        cfg.workers = workers.max(2);
        let b = moment_estimate(&cfg, &ledger)?;
        Ok((a == b, format!("W=1 {} vs W={} {}", a.mean, cfg.workers, b.mean)))
    }));

    out
}
