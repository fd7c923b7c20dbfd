use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::point::{exp_in_place, ModelPoint};
use crate::error::{domain, Result};
use crate::exec::stream_rng;

/// Seed record of a path: the master seed and the stream index it was split into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub stream: u64,
}

impl PathSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        Self { master, stream }
    }
}

/// Geodesic-increment stepper for Brownian motion with generator Δ.
///
/// Each step draws ξ ~ N(0, 2·dt·Iₙ) in the tangent space at the basepoint,
/// transports it to the current point by the boost taking the basepoint there,
/// applies the exponential map and restores the hyperboloid constraint.
#[derive(Debug, Clone)]
pub struct BrownianStepper {
    curvature: f64,
    xi: Vec<f64>,
    v: Vec<f64>,
}

impl BrownianStepper {
    pub fn new(n: usize, curvature: f64) -> Self {
        Self {
            curvature,
            xi: vec![0.0; n],
            v: vec![0.0; n + 1],
        }
    }

    /// Advances raw hyperboloid coordinates by one step of length `dt`.
    #[inline]
    pub fn step<R: Rng + ?Sized>(&mut self, coords: &mut [f64], dt: f64, rng: &mut R) {
        let sd = (2.0 * dt).sqrt();
        let mut norm2 = 0.0;
        for x in self.xi.iter_mut() {
            let g: f64 = rng.sample(StandardNormal);
            *x = sd * g;
            norm2 += *x * *x;
        }
        self.transport(coords);
        exp_in_place(coords, &self.v, norm2.sqrt(), self.curvature);
    }

    // Boost of (0, ξ) from the basepoint to `coords`, done on the unit sheet
    // y = √K·x where the boost has the closed form
    // (ȳ·ξ, ξ + ȳ(ȳ·ξ)/(1+y₀)).
    #[inline]
    fn transport(&mut self, coords: &[f64]) {
        let sk = self.curvature.sqrt();
        let y0 = sk * coords[0];
        let mut dot = 0.0;
        for (c, x) in coords[1..].iter().zip(&self.xi) {
            dot += sk * c * x;
        }
        self.v[0] = dot;
        let f = dot / (1.0 + y0);
        for i in 0..self.xi.len() {
            self.v[i + 1] = self.xi[i] + sk * coords[i + 1] * f;
        }
    }
}

/// A sampled Brownian path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrownianPath {
    pub times: Vec<f64>,
    pub points: Vec<ModelPoint>,
    pub seed: PathSeed,
}

impl BrownianPath {
    pub fn end(&self) -> &ModelPoint {
        self.points.last().expect("a path has at least its start point")
    }

    /// Writes `step,time,coord_0..coord_n` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.points[0].dim();
        write!(out, "step,time")?;
        for i in 0..=n {
            write!(out, ",coord_{i}")?;
        }
        writeln!(out)?;
        for (step, (t, p)) in self.times.iter().zip(&self.points).enumerate() {
            write!(out, "{step},{t}")?;
            for c in p.coords() {
                write!(out, ",{c}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Number of steps and the step grid for `[0, t_end]`; the last step may be shorter.
pub(crate) fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return domain(format!("t_end must be positive and finite, got {t_end}"));
    }
    if !(dt > 0.0) || dt > t_end * (1.0 + 1e-12) {
        return domain(format!("dt must satisfy 0 < dt <= t_end, got dt={dt}, t_end={t_end}"));
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut times: Vec<f64> = (0..steps).map(|k| k as f64 * dt).collect();
    times.push(t_end);
    Ok(times)
}

/// Samples a path from `x0` on `[0, t_end]` with step `dt`.
pub fn brownian_path(x0: &ModelPoint, t_end: f64, dt: f64, seed: PathSeed) -> Result<BrownianPath> {
    let times = time_grid(t_end, dt)?;
    let mut rng = stream_rng(seed.master, seed.stream);
    let mut stepper = BrownianStepper::new(x0.dim(), x0.curvature());
    let mut current = x0.coords().to_vec();
    let mut points = Vec::with_capacity(times.len());
    points.push(x0.clone());
    for w in times.windows(2) {
        stepper.step(&mut current, w[1] - w[0], &mut rng);
        points.push(ModelPoint::from_raw(current.clone(), x0.curvature()));
    }
    Ok(BrownianPath { times, points, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::{distance, minkowski};

    #[test]
    fn identical_seed_is_bitwise_identical() {
        let o = ModelPoint::basepoint(3, 1.0).unwrap();
        let a = brownian_path(&o, 1.0, 0.01, PathSeed::new(7, 3)).unwrap();
        let b = brownian_path(&o, 1.0, 0.01, PathSeed::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let c = brownian_path(&o, 1.0, 0.01, PathSeed::new(7, 4)).unwrap();
        assert_ne!(a.end(), c.end());
    }

    #[test]
    fn grid_has_uniform_steps_except_last() {
        let g = time_grid(1.0, 0.3).unwrap();
        assert_eq!(g.len(), 5);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(time_grid(0.5, 0.5).unwrap(), vec![0.0, 0.5]);
        assert!(time_grid(0.5, 0.6).is_err());
        assert!(time_grid(0.5, 0.0).is_err());
    }

    #[test]
    fn transported_increment_is_tangent() {
        let x = ModelPoint::from_spatial(&[1.3, -0.4, 2.0], 2.0).unwrap();
        let mut s = BrownianStepper::new(3, 2.0);
        s.xi.copy_from_slice(&[0.3, 0.1, -0.7]);
        s.transport(x.coords());
        let ip = minkowski(x.coords(), &s.v);
        assert!(ip.abs() < 1e-12, "{ip}");
        let norm2 = -minkowski(&s.v, &s.v);
        assert!((norm2 - 0.59).abs() < 1e-12);
    }

    #[test]
    fn path_stays_on_hyperboloid() {
        let o = ModelPoint::basepoint(3, 1.0).unwrap();
        let p = brownian_path(&o, 2.0, 0.01, PathSeed::new(1, 0)).unwrap();
        for q in &p.points {
            assert!(q.minkowski_residual().abs() < 1e-9);
        }
        assert!(distance(&o, p.end()).unwrap() > 0.0);
    }

    #[test]
    fn csv_header_and_rows() {
        let o = ModelPoint::basepoint(2, 1.0).unwrap();
        let p = brownian_path(&o, 0.02, 0.01, PathSeed::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "step,time,coord_0,coord_1,coord_2");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0,1,"));
    }
}
