//! Bessel J_ν by its power series; adequate for the moderate arguments
//! needed to locate the first positive zero.

use crate::error::{domain, Result};
use crate::roots::bisect;

use super::ln_gamma;

/// J_ν(x) for ν ≥ 0 and 0 ≤ x ≲ 20.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if nu == 0.0 { 1.0 } else { 0.0 };
    }
    let half = 0.5 * x;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    let q = -half * half;
    for k in 1..400 {
        let kf = k as f64;
        term *= q / (kf * (kf + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs() && kf > half {
            break;
        }
    }
    sum
}

/// First positive zero j_{ν,1} of J_ν.
pub fn bessel_j_first_zero(nu: f64) -> Result<f64> {
    if !(nu >= 0.0) || nu > 20.0 {
        return domain(format!("first Bessel zero supported for 0 <= nu <= 20, got {nu}"));
    }
    let mut lo = nu.max(0.5);
    let step = 0.05;
    while bessel_j(nu, lo + step) > 0.0 {
        lo += step;
        if lo > nu + 40.0 {
            return domain("no Bessel zero found".to_string());
        }
    }
    bisect(|x| bessel_j(nu, x), lo, lo + step, 1e-15)
}
