use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Lorentzian product ⟨a,b⟩ = a₀b₀ − Σ_{i≥1} aᵢbᵢ.
#[inline]
pub fn minkowski(a: &[f64], b: &[f64]) -> f64 {
    let mut s = a[0] * b[0];
    for i in 1..a.len() {
        s -= a[i] * b[i];
    }
    s
}

/// A point of H^n_K on the upper sheet ⟨x,x⟩ = 1/K, x₀ > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    coords: Vec<f64>,
    curvature: f64,
}

impl ModelPoint {
    /// The basepoint (1/√K, 0, …, 0).
    pub fn basepoint(n: usize, curvature: f64) -> Result<Self> {
        check_space(n, curvature)?;
        let mut coords = vec![0.0; n + 1];
        coords[0] = 1.0 / curvature.sqrt();
        Ok(Self { coords, curvature })
    }

    /// Lifts spatial coordinates (x₁..xₙ) to the upper sheet.
    pub fn from_spatial(spatial: &[f64], curvature: f64) -> Result<Self> {
        check_space(spatial.len(), curvature)?;
        let mut coords = Vec::with_capacity(spatial.len() + 1);
        coords.push(0.0);
        coords.extend_from_slice(spatial);
        renormalize(&mut coords, curvature);
        Ok(Self { coords, curvature })
    }

    /// Point at geodesic distance `r` from the basepoint in direction `dir`
    /// (any nonzero spatial vector; normalized here).
    pub fn at_distance(r: f64, dir: &[f64], curvature: f64) -> Result<Self> {
        check_space(dir.len(), curvature)?;
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !(r >= 0.0) {
            return domain("at_distance needs r >= 0 and a nonzero direction");
        }
        let sk = curvature.sqrt();
        let s = (sk * r).sinh() / sk;
        let spatial: Vec<f64> = dir.iter().map(|v| s * v / norm).collect();
        Self::from_spatial(&spatial, curvature)
    }

    /// Validates explicit coordinates against the hyperboloid constraint.
    pub fn new(coords: Vec<f64>, curvature: f64) -> Result<Self> {
        if coords.len() < 3 {
            return domain("need n >= 2 (at least three coordinates)");
        }
        check_space(coords.len() - 1, curvature)?;
        if !(coords[0] > 0.0) {
            return domain("point must lie on the upper sheet (x0 > 0)");
        }
        let p = Self { coords, curvature };
        let scale = p.coords.iter().map(|c| c * c).sum::<f64>() * curvature;
        if p.minkowski_residual().abs() > 1e-9 * scale.max(1.0) {
            return domain(format!("Minkowski norm residual {:e} too large", p.minkowski_residual()));
        }
        Ok(p)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// K⟨x,x⟩ − 1.
    pub fn minkowski_residual(&self) -> f64 {
        self.curvature * minkowski(&self.coords, &self.coords) - 1.0
    }


    pub(crate) fn from_raw(coords: Vec<f64>, curvature: f64) -> Self {
        Self { coords, curvature }
    }

    fn same_space(&self, other: &ModelPoint) -> Result<()> {
        if self.dim() != other.dim() || self.curvature != other.curvature {
            return Err(Error::Mismatch {
                n1: self.dim(),
                k1: self.curvature,
                n2: other.dim(),
                k2: other.curvature,
            });
        }
        Ok(())
    }
}

fn check_space(n: usize, curvature: f64) -> Result<()> {
    if n < 2 {
        return domain(format!("dimension must be >= 2, got {n}"));
    }
    if !(curvature > 0.0) || !curvature.is_finite() {
        return domain(format!("curvature magnitude must be positive, got {curvature}"));
    }
    Ok(())
}

/// Recomputes x₀ from the spatial part so that ⟨x,x⟩ = 1/K and x₀ > 0.
#[inline]
pub(crate) fn renormalize(coords: &mut [f64], curvature: f64) {
    let s: f64 = coords[1..].iter().map(|c| c * c).sum();
    coords[0] = (1.0 / curvature + s).sqrt();
}

/// Geodesic distance between raw coordinate slices on H^n_K.
///
/// Near the diagonal the chordal form 2/√K·asinh(√K·|x−y|_L/2) avoids the
/// cancellation in arccosh(1 + ε).
#[inline]
pub(crate) fn distance_unchecked(a: &[f64], b: &[f64], curvature: f64) -> f64 {
    let sk = curvature.sqrt();
    let ip = curvature * minkowski(a, b);
    if ip > 1.5 {
        return ip.acosh() / sk;
    }
    let mut q = -(a[0] - b[0]) * (a[0] - b[0]);
    for i in 1..a.len() {
        let d = a[i] - b[i];
        q += d * d;
    }
    2.0 * (0.5 * sk * q.max(0.0).sqrt()).asinh() / sk
}

/// d(x,y) = arccosh(K⟨x,y⟩)/√K.
pub fn distance(x: &ModelPoint, y: &ModelPoint) -> Result<f64> {
    x.same_space(y)?;
    Ok(distance_unchecked(&x.coords, &y.coords, x.curvature))
}

#[inline]
fn sinhc(theta: f64) -> f64 {
    if theta.abs() < 1e-4 {
        1.0 + theta * theta / 6.0
    } else {
        theta.sinh() / theta
    }
}

/// Exponential map at `x` applied to the tangent vector `v` (ambient coordinates).
pub fn exp_map(x: &ModelPoint, v: &[f64]) -> Result<ModelPoint> {
    if v.len() != x.coords.len() {
        return domain("tangent vector length must be n+1");
    }
    let ex: f64 = x.coords.iter().map(|c| c * c).sum::<f64>().sqrt();
    let ev: f64 = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let residual = minkowski(&x.coords, v);
    if residual.abs() > 1e-9 * (ex * ev).max(1e-300) && residual.abs() > 1e-12 {
        return Err(Error::NotTangent(residual));
    }
    let norm = (-minkowski(v, v)).max(0.0).sqrt();
    let mut coords = x.coords.clone();
    exp_in_place(&mut coords, v, norm, x.curvature);
    Ok(ModelPoint {
        coords,
        curvature: x.curvature,
    })
}

/// `coords ← cosh(θ)·coords + sinhc(θ)·v` with θ = √K·norm, then renormalized.
#[inline]
pub(crate) fn exp_in_place(coords: &mut [f64], v: &[f64], norm: f64, curvature: f64) {
    let theta = curvature.sqrt() * norm;
    let (c, s) = (theta.cosh(), sinhc(theta));
    for (x, vi) in coords.iter_mut().zip(v) {
        *x = c * *x + s * vi;
    }
    renormalize(coords, curvature);
}

/// Inverse of [`exp_map`]: the tangent vector at `x` pointing to `y` with norm d(x,y).
pub fn log_map(x: &ModelPoint, y: &ModelPoint) -> Result<Vec<f64>> {
    x.same_space(y)?;
    let k = x.curvature;
    let d = distance_unchecked(&x.coords, &y.coords, k);
    let ip = minkowski(&x.coords, &y.coords);
    let scale = 1.0 / sinhc(k.sqrt() * d);
    Ok(x
        .coords
        .iter()
        .zip(&y.coords)
        .map(|(xi, yi)| scale * (yi - k * ip * xi))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn point(spatial: Vec<f64>, k: f64) -> ModelPoint {
        ModelPoint::from_spatial(&spatial, k).unwrap()
    }

    #[test]
    fn basepoint_distance_is_zero() {
        let o = ModelPoint::basepoint(3, 2.0).unwrap();
        assert_eq!(distance(&o, &o).unwrap(), 0.0);
    }

    #[test]
    fn unit_geodesic() {
        let o = ModelPoint::basepoint(2, 1.0).unwrap();
        let y = ModelPoint::new(vec![1f64.cosh(), 1f64.sinh(), 0.0], 1.0).unwrap();
        assert!((distance(&o, &y).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mismatched_spaces_error() {
        let a = ModelPoint::basepoint(3, 1.0).unwrap();
        let b = ModelPoint::basepoint(2, 1.0).unwrap();
        let c = ModelPoint::basepoint(3, 2.0).unwrap();
        assert!(matches!(distance(&a, &b), Err(Error::Mismatch { .. })));
        assert!(matches!(distance(&a, &c), Err(Error::Mismatch { .. })));
    }

    #[test]
    fn rejects_off_sheet_points() {
        assert!(ModelPoint::new(vec![2.0, 0.0, 0.0], 1.0).is_err());
        assert!(ModelPoint::new(vec![-1.0, 0.0, 0.0], 1.0).is_err());
        assert!(ModelPoint::basepoint(1, 1.0).is_err());
        assert!(ModelPoint::basepoint(3, 0.0).is_err());
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let x = point(vec![0.3, -0.2, 1.1], 1.5);
        let y = exp_map(&x, &[0.0; 4]).unwrap();
        assert!(distance(&x, &y).unwrap() < 1e-12);
    }

    #[test]
    fn exp_rejects_non_tangent() {
        let o = ModelPoint::basepoint(2, 1.0).unwrap();
        assert!(matches!(exp_map(&o, &[0.5, 0.1, 0.0]), Err(Error::NotTangent(_))));
    }

    #[test]
    fn exp_distance_round_trip() {
        for &k in &[0.5, 1.0, 3.0] {
            let x = point(vec![0.4, 1.2, -0.7], k);
            let probe = vec![0.0, 0.3, -0.5, 0.8];
            // Project onto T_x: v = w − K⟨x,w⟩ x.
            let ip = minkowski(x.coords(), &probe);
            let w: Vec<f64> = probe.iter().zip(x.coords()).map(|(p, xi)| p - k * ip * xi).collect();
            let wn = (-minkowski(&w, &w)).sqrt();
            for &r in &[0.01, 1.0, 10.0] {
                let v: Vec<f64> = w.iter().map(|c| c * r / wn).collect();
                let y = exp_map(&x, &v).unwrap();
                let d = distance(&x, &y).unwrap();
                assert!((d - r).abs() < 1e-8 * r.max(1.0), "k={k} r={r} d={d}");
            }
        }
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in prop::collection::vec(-3.0f64..3.0, 3),
                               b in prop::collection::vec(-3.0f64..3.0, 3),
                               c in prop::collection::vec(-3.0f64..3.0, 3),
                               k in 0.2f64..4.0) {
            let (x, y, z) = (point(a, k), point(b, k), point(c, k));
            let dxz = distance(&x, &z).unwrap();
            let dxy = distance(&x, &y).unwrap();
            let dyz = distance(&y, &z).unwrap();
            prop_assert!(dxz <= dxy + dyz + 1e-9);
            prop_assert!((dxy - distance(&y, &x).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn log_inverts_exp(a in prop::collection::vec(-2.0f64..2.0, 3),
                           b in prop::collection::vec(-2.0f64..2.0, 3),
                           k in 0.2f64..4.0) {
            let (x, y) = (point(a, k), point(b, k));
            let v = log_map(&x, &y).unwrap();
            let back = exp_map(&x, &v).unwrap();
            prop_assert!(distance(&back, &y).unwrap() < 1e-7);
        }
    }
}
