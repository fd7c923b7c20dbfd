//! Streaming moments with associative merges, and least-squares slopes.

use serde::{Deserialize, Serialize};

/// Welford running mean / variance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Welford {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Welford) -> Welford {
        let count = self.count + other.count;
        if count == 0 {
            return Welford::new();
        }
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * nb / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * na * nb / count as f64;
        Welford { count, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

/// Welford statistics of `exp(L)` accumulated from log-values `L`.
///
/// Stored values are scaled by `exp(-shift)`, where `shift` is the largest
/// log-value seen so far, so nothing overflows however large `L` gets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogWelford {
    pub count: u64,
    pub shift: f64,
    pub mean: f64,
    pub m2: f64,
}

impl Default for LogWelford {
    fn default() -> Self {
        Self {
            count: 0,
            shift: f64::NEG_INFINITY,
            mean: 0.0,
            m2: 0.0,
        }
    }
}

impl LogWelford {
    pub fn new() -> Self {
        Self::default()
    }

    fn rescale(&mut self, new_shift: f64) {
        if new_shift > self.shift {
            let f = if self.shift == f64::NEG_INFINITY {
                0.0
            } else {
                (self.shift - new_shift).exp()
            };
            self.mean *= f;
            self.m2 *= f * f;
            self.shift = new_shift;
        }
    }

    /// Adds the sample `exp(log_value)`; `-inf` encodes an exact zero.
    pub fn push(&mut self, log_value: f64) {
        if log_value > self.shift {
            self.rescale(log_value);
        }
        let x = if log_value == f64::NEG_INFINITY {
            0.0
        } else {
            (log_value - self.shift).exp()
        };
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&self, other: &LogWelford) -> LogWelford {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let shift = self.shift.max(other.shift);
        let mut a = *self;
        let mut b = *other;
        a.rescale(shift);
        b.rescale(shift);
        let merged = Welford {
            count: a.count,
            mean: a.mean,
            m2: a.m2,
        }
        .merge(&Welford {
            count: b.count,
            mean: b.mean,
            m2: b.m2,
        });
        LogWelford {
            count: merged.count,
            shift,
            mean: merged.mean,
            m2: merged.m2,
        }
    }

    /// ln of the sample mean (`-inf` when every sample was zero).
    pub fn log_mean(&self) -> f64 {
        if self.count == 0 || self.mean <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.shift + self.mean.ln()
        }
    }

    /// ln of the standard error of the mean.
    pub fn log_stderr(&self) -> f64 {
        if self.count < 2 || self.m2 <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let var = self.m2 / (self.count - 1) as f64;
        self.shift + 0.5 * (var / self.count as f64).ln()
    }

    /// Standard error relative to the mean; scale free.
    pub fn relative_stderr(&self) -> f64 {
        if self.count < 2 || self.mean <= 0.0 {
            return 0.0;
        }
        let var = (self.m2 / (self.count - 1) as f64).max(0.0);
        (var / self.count as f64).sqrt() / self.mean
    }
}

/// Ordinary least squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some(LinearFit {
        slope,
        intercept,
        slope_stderr,
    })
}

/// Slope of ln y against ln x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// `n` points spaced evenly in log between `lo` and `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
