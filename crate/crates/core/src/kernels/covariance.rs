use std::f64::consts::PI;

use super::{KernelTable, NoiseSpec, TableGrid};
use crate::error::{Error, Result};
use crate::hyperbolic::{HeatKernelMode, RadialProfile};
use crate::specialfn::{integrate, integrate_with_breaks, QuadratureSpec};

/// Cumulative Ψ(s) = ∫₀^s G(σ)·√K sinh(√K σ) dσ, cached at the table nodes.
struct SphereAverage<'a> {
    table: &'a KernelTable,
    sk: f64,
    cumulative: Vec<f64>,
    quad: QuadratureSpec,
}

impl<'a> SphereAverage<'a> {
    fn new(table: &'a KernelTable, quad: QuadratureSpec) -> Result<Self> {
        let sk = table.curvature.sqrt();
        let f = |s: f64| table.eval(s) * sk * (sk * s).sinh();
        let mut cumulative = Vec::with_capacity(table.nodes().len());
        let mut acc = integrate(f, 0.0, table.d_min(), &quad)?.value;
        cumulative.push(acc);
        for w in table.nodes().windows(2) {
            acc += integrate(f, w[0], w[1], &quad)?.value;
            cumulative.push(acc);
        }
        Ok(Self {
            table,
            sk,
            cumulative,
            quad,
        })
    }

    fn psi(&self, s: f64) -> Result<f64> {
        let f = |v: f64| self.table.eval(v) * self.sk * (self.sk * v).sinh();
        let nodes = self.table.nodes();
        if s < nodes[0] {
            return Ok(integrate(f, 0.0, s, &self.quad)?.value);
        }
        let i = nodes.partition_point(|&v| v <= s) - 1;
        Ok(self.cumulative[i] + integrate(f, nodes[i], s, &self.quad)?.value)
    }
}

fn support(p: &RadialProfile) -> Result<(f64, Vec<f64>)> {
    match p {
        RadialProfile::Ball { radius, .. } => Ok((*radius, vec![])),
        RadialProfile::Table { radii, values } if *values.last().unwrap() == 0.0 => {
            Ok((*radii.last().unwrap(), radii.clone()))
        }
        _ => Err(Error::Unsupported(
            "covariance form needs compactly supported profiles (ball or vanishing table)".into(),
        )),
    }
}

/// ⟨f, g⟩ = ∬ f(x) g(y) G_{2α}(x, y) dx dy for profiles radial about a common
/// center, in n = 3 with the exact kernel.
///
/// Averaging G over the sphere of radius r₂ seen from a point at radius r₁
/// gives [Ψ(r₁+r₂) − Ψ(|r₁−r₂|)]/(sinh √K r₁ · sinh √K r₂), so the form is
/// 8π²/K² ∬ f(r₁) g(r₂) sinh(√K r₁) sinh(√K r₂) [Ψ(r₁+r₂) − Ψ(|r₁−r₂|)].
/// Requires α > 1/4 so that Ψ is finite.
pub fn covariance_form(f: &RadialProfile, g: &RadialProfile, spec: &NoiseSpec, quad: &QuadratureSpec) -> Result<f64> {
    if spec.n != 3 {
        return Err(Error::Unsupported(format!(
            "covariance form needs the exact kernel (n = 3), got n = {}",
            spec.n
        )));
    }
    spec.require_dalang()?;
    f.validate()?;
    g.validate()?;
    let (rf, kf) = support(f)?;
    let (rg, kg) = support(g)?;
    let kernel = spec.covariance_kernel();
    let grid = TableGrid {
        d_min: 1e-6,
        d_max: rf + rg + 1.0,
        per_decade: 32,
    };
    let table = KernelTable::build(&kernel, HeatKernelMode::ExactN3, &grid, quad)?;
    let sphere = SphereAverage::new(&table, *quad)?;
    let k = spec.curvature;
    let sk = k.sqrt();

    let failure = std::cell::RefCell::new(None::<Error>);
    let guard = |r: Result<f64>| match r {
        Ok(v) => v,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    };
    let inner = |r1: f64| -> Result<f64> {
        let fv = f.eval(r1);
        if fv == 0.0 {
            return Ok(0.0);
        }
        let mut breaks = kg.clone();
        breaks.push(r1);
        let v = integrate_with_breaks(
            |r2| {
                let gv = g.eval(r2);
                if gv == 0.0 {
                    return 0.0;
                }
                let diff = guard(sphere.psi(r1 + r2)) - guard(sphere.psi((r1 - r2).abs()));
                gv * (sk * r2).sinh() * diff
            },
            0.0,
            rg,
            &breaks,
            quad,
        )?;
        Ok(fv * (sk * r1).sinh() * v.value)
    };
    let outer = integrate_with_breaks(|r1| guard(inner(r1)), 0.0, rf, &kf, quad)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(8.0 * PI * PI / (k * k) * outer.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(eps: f64, r: f64) -> RadialProfile {
        RadialProfile::Ball { epsilon: eps, radius: r }
    }

    #[test]
    fn positive_bilinear_symmetric() {
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0).unwrap();
        let q = QuadratureSpec::new(1e-9, 1e-15, 2000).unwrap();
        let a = covariance_form(&ball(1.0, 0.5), &ball(1.0, 0.5), &spec, &q).unwrap();
        assert!(a > 0.0);
        let hat = RadialProfile::Table {
            radii: vec![0.0, 0.8],
            values: vec![1.0, 0.0],
        };
        let fg = covariance_form(&ball(1.0, 0.5), &hat, &spec, &q).unwrap();
        let gf = covariance_form(&hat, &ball(1.0, 0.5), &spec, &q).unwrap();
        assert!((fg - gf).abs() < 1e-7 * fg.abs(), "{fg} vs {gf}");
        let two = covariance_form(&ball(2.0, 0.5), &hat, &spec, &q).unwrap();
        assert!((two - 2.0 * fg).abs() < 1e-8 * two.abs());
    }

    #[test]
    fn rejects_other_dimensions_and_unbounded_support() {
        let q = QuadratureSpec::default();
        let spec = NoiseSpec::new(1.0, 1.0, 2, 1.0).unwrap();
        assert!(matches!(
            covariance_form(&ball(1.0, 0.5), &ball(1.0, 0.5), &spec, &q),
            Err(Error::Unsupported(_))
        ));
        let spec = NoiseSpec::new(1.0, 1.0, 3, 1.0).unwrap();
        let c = RadialProfile::Constant { value: 1.0 };
        assert!(matches!(covariance_form(&c, &c, &spec, &q), Err(Error::Unsupported(_))));
    }
}
