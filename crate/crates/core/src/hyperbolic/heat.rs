use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::brownian::{time_grid, BrownianStepper};
use super::point::{distance_unchecked, ModelPoint};
use crate::bracket::{BracketMode, KernelBracket};
use crate::error::{domain, Error, Result};
use crate::exec::{blocks, map_ordered, stream_rng};
use crate::ledger::{self, ConstantLedger};
use crate::specialfn::{integrate_with_breaks, ln_dm_h, QuadratureSpec};
use crate::stats::Welford;

/// Which heat kernel to evaluate: the closed form in dimension three or one
/// side of the Davies–Mandouvalous bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum HeatKernelMode {
    ExactN3,
    DmUpper { c_upper: f64 },
    DmLower { c_lower: f64 },
}

impl HeatKernelMode {
    pub fn dm_upper(ledger: &ConstantLedger) -> Self {
        HeatKernelMode::DmUpper {
            c_upper: ledger.value(ledger::DM_C_UPPER),
        }
    }

    pub fn dm_lower(ledger: &ConstantLedger) -> Self {
        HeatKernelMode::DmLower {
            c_lower: ledger.value(ledger::DM_C_LOWER),
        }
    }

    pub fn bracket_mode(&self) -> BracketMode {
        match self {
            HeatKernelMode::ExactN3 => BracketMode::Exact,
            HeatKernelMode::DmUpper { .. } => BracketMode::Upper,
            HeatKernelMode::DmLower { .. } => BracketMode::Lower,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HeatKernelMode::ExactN3 => "EXACT_N3",
            HeatKernelMode::DmUpper { .. } => "DM_UPPER",
            HeatKernelMode::DmLower { .. } => "DM_LOWER",
        }
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        match *self {
            HeatKernelMode::ExactN3 if n != 3 => Err(Error::Mode { mode: "EXACT_N3", n }),
            HeatKernelMode::DmUpper { c_upper: c } | HeatKernelMode::DmLower { c_lower: c } if !(c > 0.0) => {
                domain(format!("bracket constant must be positive, got {c}"))
            }
            _ => Ok(()),
        }
    }
}

/// ln(r / sinh r), accurate at both ends.
#[inline]
pub(crate) fn ln_r_over_sinh(r: f64) -> f64 {
    if r < 1e-4 {
        -r * r / 6.0
    } else if r < 20.0 {
        (r / r.sinh()).ln()
    } else {
        (2.0 * r).ln() - r - (-(-2.0 * r).exp()).ln_1p()
    }
}

/// ln sinh x for x > 0.
#[inline]
pub(crate) fn ln_sinh(x: f64) -> f64 {
    if x < 20.0 {
        x.sinh().ln()
    } else {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// ln P¹_τ(r) for the unit-curvature three-dimensional kernel.
#[inline]
pub(crate) fn ln_p1_n3(tau: f64, r: f64) -> f64 {
    -1.5 * (4.0 * PI * tau).ln() + ln_r_over_sinh(r) - tau - r * r / (4.0 * tau)
}

/// Logarithm of the heat kernel value; finite where the value itself underflows.
pub fn ln_heat_kernel(t: f64, d: f64, n: usize, curvature: f64, mode: HeatKernelMode) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    if !(d >= 0.0) {
        return domain(format!("heat kernel needs d >= 0, got {d}"));
    }
    if !(curvature > 0.0) {
        return domain(format!("curvature magnitude must be positive, got {curvature}"));
    }
    mode.check(n)?;
    let sk = curvature.sqrt();
    let scale = 0.5 * n as f64 * curvature.ln();
    match mode {
        HeatKernelMode::ExactN3 => Ok(scale + ln_p1_n3(curvature * t, sk * d)),
        HeatKernelMode::DmUpper { c_upper: c } | HeatKernelMode::DmLower { c_lower: c } => {
            Ok(c.ln() + scale + ln_dm_h(curvature * t, sk * d, n)?)
        }
    }
}

/// Heat kernel P_t at distance `d` on H^n_K, tagged with its bracket mode.
pub fn heat_kernel(t: f64, d: f64, n: usize, curvature: f64, mode: HeatKernelMode) -> Result<KernelBracket> {
    let l = ln_heat_kernel(t, d, n, curvature, mode)?;
    Ok(KernelBracket {
        value: l.exp(),
        mode: mode.bracket_mode(),
        alpha: None,
        d,
    })
}

/// Radial initial data around a center point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialProfile {
    Constant { value: f64 },
    /// ε·1{d ≤ R}.
    Ball { epsilon: f64, radius: f64 },
    /// Piecewise linear in the radius; held at the last value beyond the table.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

impl RadialProfile {
    pub fn validate(&self) -> Result<()> {
        match self {
            RadialProfile::Constant { value } if !value.is_finite() => domain("constant profile must be finite"),
            RadialProfile::Ball { epsilon, radius } if !epsilon.is_finite() || !(*radius > 0.0) => {
                domain("ball profile needs finite epsilon and radius > 0")
            }
            RadialProfile::Table { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(Error::Unsupported("table profile needs matching nonempty radii and values".into()));
                }
                if radii[0] != 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Unsupported(
                        "table radii must start at 0 and increase strictly".into(),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Unsupported("table profile must be bounded".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match self {
            RadialProfile::Constant { value } => *value,
            RadialProfile::Ball { epsilon, radius } => {
                if r <= *radius {
                    *epsilon
                } else {
                    0.0
                }
            }
            RadialProfile::Table { radii, values } => {
                let last = radii.len() - 1;
                if r >= radii[last] {
                    return values[last];
                }
                let i = radii.partition_point(|&x| x <= r) - 1;
                let w = (r - radii[i]) / (radii[i + 1] - radii[i]);
                values[i] + w * (values[i + 1] - values[i])
            }
        }
    }

    pub fn sup_abs(&self) -> f64 {
        match self {
            RadialProfile::Constant { value } => value.abs(),
            RadialProfile::Ball { epsilon, .. } => epsilon.abs(),
            RadialProfile::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Radius beyond which the profile vanishes, if it does.
    fn support(&self) -> Option<f64> {
        match self {
            RadialProfile::Constant { .. } => None,
            RadialProfile::Ball { radius, .. } => Some(*radius),
            RadialProfile::Table { radii, values } => {
                if *values.last().unwrap() == 0.0 {
                    Some(*radii.last().unwrap())
                } else {
                    None
                }
            }
        }
    }

    fn kinks(&self) -> Vec<f64> {
        match self {
            RadialProfile::Constant { .. } => vec![],
            RadialProfile::Ball { radius, .. } => vec![*radius],
            RadialProfile::Table { radii, .. } => radii.clone(),
        }
    }
}

/// A radial profile placed at a center point: u₀(y) = profile(d(center, y)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialFunction {
    pub center: ModelPoint,
    pub profile: RadialProfile,
}

impl RadialFunction {
    pub fn new(center: ModelPoint, profile: RadialProfile) -> Result<Self> {
        profile.validate()?;
        Ok(Self { center, profile })
    }

    pub fn eval(&self, y: &ModelPoint) -> f64 {
        self.eval_coords(y.coords())
    }

    #[inline]
    pub(crate) fn eval_coords(&self, y: &[f64]) -> f64 {
        self.profile
            .eval(distance_unchecked(self.center.coords(), y, self.center.curvature()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SemigroupMethod {
    /// Geodesic-polar quadrature against the exact kernel (n = 3).
    Quadrature(QuadratureSpec),
    /// Average of u₀(B_t) over sampled paths.
    MonteCarlo { dt: f64, n_paths: u64, seed: u64, workers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemigroupValue {
    pub value: f64,
    pub stderr: Option<f64>,
}

/// (P_t u₀)(x) = ∫ P_t(x,y) u₀(y) dy.
pub fn heat_semigroup_apply(
    t: f64,
    u0: &RadialFunction,
    x: &ModelPoint,
    method: SemigroupMethod,
) -> Result<SemigroupValue> {
    u0.profile.validate()?;
    if x.dim() != u0.center.dim() || x.curvature() != u0.center.curvature() {
        return Err(Error::Mismatch {
            n1: x.dim(),
            k1: x.curvature(),
            n2: u0.center.dim(),
            k2: u0.center.curvature(),
        });
    }
    if !(t > 0.0) || !t.is_finite() {
        return domain(format!("semigroup time must be positive, got {t}"));
    }
    match method {
        SemigroupMethod::Quadrature(spec) => semigroup_quadrature(t, u0, x, &spec),
        SemigroupMethod::MonteCarlo {
            dt,
            n_paths,
            seed,
            workers,
        } => semigroup_mc(t, u0, x, dt, n_paths, seed, workers),
    }
}

fn semigroup_quadrature(t: f64, u0: &RadialFunction, x: &ModelPoint, spec: &QuadratureSpec) -> Result<SemigroupValue> {
    let n = x.dim();
    if n != 3 {
        return Err(Error::Unsupported(format!(
            "quadrature semigroup needs the exact kernel (n = 3), got n = {n}"
        )));
    }
    let k = x.curvature();
    let sk = k.sqrt();
    let rho = distance_unchecked(u0.center.coords(), x.coords(), k);
    let profile = &u0.profile;
    let ln_norm = 1.5 * k.ln();

    // Polar coordinates around x. With s = d(center, y) the angular average
    // over the sphere S_r(x) becomes a one-dimensional integral in s over
    // [|r−ρ|, r+ρ] with weight √K sinh(√K s) / (sinh(√K ρ) sinh(√K r)).
    let shell = |r: f64| -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let ln_kernel = ln_norm + ln_p1_n3(k * t, sk * r);
        let ln_area = (4.0 * PI / k).ln() + 2.0 * ln_sinh(sk * r);
        let weight = (ln_kernel + ln_area).exp();
        if weight == 0.0 {
            return Ok(0.0);
        }
        if rho < 1e-12 || matches!(profile, RadialProfile::Constant { .. }) {
            return Ok(weight * profile.eval(r));
        }
        let (lo, hi) = ((r - rho).abs(), r + rho);
        let denom = 2.0 * (sk * rho).sinh() * (sk * r).sinh();
        let avg = match profile {
            RadialProfile::Ball { epsilon, radius } => {
                // Closed form of the angular fraction inside the ball.
                let top = radius.min(hi);
                if top <= lo {
                    0.0
                } else {
                    epsilon * ((sk * top).cosh() - (sk * lo).cosh()) / denom
                }
            }
            _ => {
                let inner = integrate_with_breaks(
                    |s| profile.eval(s) * sk * (sk * s).sinh(),
                    lo,
                    hi,
                    &profile.kinks(),
                    spec,
                )?;
                inner.value / denom
            }
        };
        Ok(weight * avg)
    };

    let (a, b) = match profile.support() {
        Some(r_max) => ((rho - r_max).max(0.0), rho + r_max),
        None => (0.0, f64::INFINITY),
    };
    let spread = t.sqrt();
    let drift = 2.0 * sk * t;
    let mut breaks: Vec<f64> = [0.5, 2.0, 5.0, 12.0].iter().map(|m| m * spread + drift).collect();
    breaks.extend(profile.kinks().iter().flat_map(|&k| [(rho - k).abs(), rho + k]));
    breaks.push(rho);

    let failure = std::cell::Cell::new(None);
    let r = integrate_with_breaks(
        |r| match shell(r) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e.to_string()));
                0.0
            }
        },
        a,
        b,
        &breaks,
        spec,
    )?;
    if let Some(msg) = failure.take() {
        return Err(Error::Domain(msg));
    }
    Ok(SemigroupValue {
        value: r.value,
        stderr: None,
    })
}

fn semigroup_mc(
    t: f64,
    u0: &RadialFunction,
    x: &ModelPoint,
    dt: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<SemigroupValue> {
    if n_paths < 2 {
        return domain("Monte Carlo needs at least two paths");
    }
    let times = time_grid(t, dt)?;
    let per_block = map_ordered(blocks(n_paths), workers, |(b, _, len)| {
        let mut rng = stream_rng(seed, b);
        let mut stepper = BrownianStepper::new(x.dim(), x.curvature());
        let mut acc = Welford::new();
        let mut coords = x.coords().to_vec();
        for _ in 0..len {
            coords.copy_from_slice(x.coords());
            for w in times.windows(2) {
                stepper.step(&mut coords, w[1] - w[0], &mut rng);
            }
            acc.push(u0.eval_coords(&coords));
        }
        acc
    });
    let acc = per_block.iter().fold(Welford::new(), |a, b| a.merge(b));
    Ok(SemigroupValue {
        value: acc.mean,
        stderr: Some(acc.stderr()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_origin() {
        for &t in &[0.1, 1.0, 3.0] {
            let v = heat_kernel(t, 0.0, 3, 1.0, HeatKernelMode::ExactN3).unwrap().value;
            let expect = (4.0 * PI * t).powf(-1.5) * (-t).exp();
            assert!((v - expect).abs() < 1e-14 * expect);
        }
    }

    #[test]
    fn exact_requires_three_dimensions() {
        assert!(matches!(
            heat_kernel(1.0, 0.0, 2, 1.0, HeatKernelMode::ExactN3),
            Err(Error::Mode { n: 2, .. })
        ));
    }

    #[test]
    fn curvature_scaling() {
        let k: f64 = 2.5;
        let a = heat_kernel(0.3, 0.7, 3, k, HeatKernelMode::ExactN3).unwrap().value;
        let b = heat_kernel(k * 0.3, k.sqrt() * 0.7, 3, 1.0, HeatKernelMode::ExactN3).unwrap().value;
        assert!((a - k.powf(1.5) * b).abs() < 1e-13 * a);
    }

    #[test]
    fn bracket_modes_are_tagged() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        let up = heat_kernel(1.0, 1.0, 3, 1.0, HeatKernelMode::dm_upper(&l)).unwrap();
        let lo = heat_kernel(1.0, 1.0, 3, 1.0, HeatKernelMode::dm_lower(&l)).unwrap();
        let ex = heat_kernel(1.0, 1.0, 3, 1.0, HeatKernelMode::ExactN3).unwrap();
        assert_eq!(up.mode, BracketMode::Upper);
        assert_eq!(lo.mode, BracketMode::Lower);
        assert!(lo.value <= ex.value && ex.value <= up.value);
    }

    #[test]
    fn ln_helpers_are_continuous() {
        for &x in &[1e-4, 20.0] {
            let a = ln_r_over_sinh(x * (1.0 - 1e-12));
            let b = ln_r_over_sinh(x * (1.0 + 1e-12));
            assert!((a - b).abs() < 1e-10);
        }
        assert!((ln_sinh(20.0 - 1e-12) - ln_sinh(20.0 + 1e-12)).abs() < 1e-10);
        assert!((ln_sinh(50.0) - (50.0 - std::f64::consts::LN_2)).abs() < 1e-15);
    }

    #[test]
    fn table_profile_interpolates() {
        let p = RadialProfile::Table {
            radii: vec![0.0, 1.0, 2.0],
            values: vec![1.0, 0.5, 0.0],
        };
        p.validate().unwrap();
        assert_eq!(p.eval(0.5), 0.75);
        assert_eq!(p.eval(3.0), 0.0);
        assert_eq!(p.support(), Some(2.0));
        let bad = RadialProfile::Table {
            radii: vec![0.5, 1.0],
            values: vec![1.0, 0.0],
        };
        assert!(matches!(bad.validate(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn mass_is_conserved_by_quadrature() {
        let o = ModelPoint::basepoint(3, 1.0).unwrap();
        let x = ModelPoint::at_distance(0.8, &[1.0, 0.0, 0.0], 1.0).unwrap();
        let u = RadialFunction::new(o, RadialProfile::Constant { value: 1.0 }).unwrap();
        for &t in &[0.1, 1.0, 5.0] {
            let v = heat_semigroup_apply(t, &u, &x, SemigroupMethod::Quadrature(QuadratureSpec::default())).unwrap();
            assert!((v.value - 1.0).abs() < 1e-8, "t={t}: {}", v.value);
        }
    }

    #[test]
    fn quadrature_rejects_other_dimensions() {
        let o = ModelPoint::basepoint(2, 1.0).unwrap();
        let u = RadialFunction::new(o.clone(), RadialProfile::Constant { value: 1.0 }).unwrap();
        let r = heat_semigroup_apply(1.0, &u, &o, SemigroupMethod::Quadrature(QuadratureSpec::default()));
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn off_center_table_matches_ball() {
        // A table that is a (nearly) sharp step reproduces the ball result.
        let o = ModelPoint::basepoint(3, 1.0).unwrap();
        let x = ModelPoint::at_distance(0.6, &[0.0, 1.0, 0.0], 1.0).unwrap();
        let spec = QuadratureSpec::new(1e-9, 1e-14, 4000).unwrap();
        let ball = RadialFunction::new(o.clone(), RadialProfile::Ball { epsilon: 2.0, radius: 1.0 }).unwrap();
        let step = RadialFunction::new(
            o,
            RadialProfile::Table {
                radii: vec![0.0, 1.0, 1.0 + 1e-9],
                values: vec![2.0, 2.0, 0.0],
            },
        )
        .unwrap();
        let a = heat_semigroup_apply(0.4, &ball, &x, SemigroupMethod::Quadrature(spec)).unwrap().value;
        let b = heat_semigroup_apply(0.4, &step, &x, SemigroupMethod::Quadrature(spec)).unwrap().value;
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
