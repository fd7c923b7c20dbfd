use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::{blocks, map_ordered, stream_rng};
use crate::hyperbolic::{BrownianStepper, ModelPoint};
use crate::stats::{linear_fit, LinearFit};

/// Fraction of Brownian paths from the centre still inside B(o, R) at each time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    pub fraction: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: u64,
}

impl SurvivalCurve {
    /// Fit of −ln(fraction) against t on [t_lo, t_hi]; the slope is the decay rate.
    pub fn decay_rate(&self, t_lo: f64, t_hi: f64) -> Option<LinearFit> {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (&t, &f) in self.times.iter().zip(&self.fraction) {
            if t >= t_lo && t <= t_hi && f > 0.0 {
                x.push(t);
                y.push(-f.ln());
            }
        }
        linear_fit(&x, &y)
    }
}

/// Monitors each path on the step grid, so an excursion out and back within
/// one step goes unseen and the survival fraction is biased slightly high.
#[allow(clippy::too_many_arguments)]
pub fn exit_time_survival(
    radius: f64,
    n: usize,
    curvature: f64,
    times: &[f64],
    dt: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<SurvivalCurve> {
    if !(radius > 0.0) {
        return domain(format!("ball radius must be positive, got {radius}"));
    }
    if !(dt > 0.0) || times.is_empty() || n_paths == 0 || workers == 0 {
        return Err(Error::Config("need dt > 0, a nonempty time grid, paths and workers".into()));
    }
    let origin = ModelPoint::basepoint(n, curvature)?;
    let origin = origin.coords().to_vec();
    let steps: Vec<usize> = times.iter().map(|&t| (t / dt).round() as usize).collect();
    let total = steps.iter().cloned().max().unwrap_or(0);
    // Exit when the time coordinate exceeds cosh(R√K)/√K.
    let sk = curvature.sqrt();
    let x0_max = (radius * sk).cosh() / sk;

    let per_block = map_ordered(blocks(n_paths), workers, |(b, _, len)| {
        let mut rng = stream_rng(seed, b);
        let mut stepper = BrownianStepper::new(n, curvature);
        let mut coords = origin.clone();
        // alive[k]: paths not yet seen outside at step k.
        let mut alive = vec![0u64; total + 1];
        for _ in 0..len {
            coords.copy_from_slice(&origin);
            let mut k = 0;
            while k < total {
                stepper.step(&mut coords, dt, &mut rng);
                if coords[0] > x0_max {
                    break;
                }
                k += 1;
            }
            // Survived steps 0..=k.
            alive[k] += 1;
        }
        alive
    });
    let mut last = vec![0u64; total + 1];
    for a in &per_block {
        for (x, y) in last.iter_mut().zip(a) {
            *x += y;
        }
    }
    // Paths whose last in-ball step is ≥ k.
    let mut surv = vec![0u64; total + 1];
    let mut acc = 0;
    for k in (0..=total).rev() {
        acc += last[k];
        surv[k] = acc;
    }
    let nf = n_paths as f64;
    let fraction: Vec<f64> = steps.iter().map(|&k| surv[k] as f64 / nf).collect();
    let stderr = fraction.iter().map(|f| (f * (1.0 - f) / nf).sqrt()).collect();
    Ok(SurvivalCurve {
        times: times.to_vec(),
        fraction,
        stderr,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn survival_is_monotone_and_starts_at_one() {
        let c = exit_time_survival(1.0, 3, 1.0, &[0.0, 0.05, 0.1, 0.2], 1e-3, 2000, 3, 1).unwrap();
        assert_eq!(c.fraction[0], 1.0);
        assert!(c.fraction.windows(2).all(|w| w[1] <= w[0]));
        let d = exit_time_survival(1.0, 3, 1.0, &[0.0, 0.05, 0.1, 0.2], 1e-3, 2000, 3, 4).unwrap();
        assert_eq!(c, d);
    }
}
