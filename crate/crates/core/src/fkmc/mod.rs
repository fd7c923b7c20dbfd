//! Feynman–Kac Monte Carlo for the moments E[u(t,x)^p], together with the
//! analytic lower-bound machinery: Q(r), its supremum, critical thresholds,
//! the Dirichlet eigenvalue bound and large-parameter slope checks.

mod engine;
mod exit;
mod lower;

pub use engine::{
    chaos_k1_estimate, chaos_k1_estimate_with, intermittency_ratio, moment_estimate, moment_estimate_with,
    moment_series_with, RatioPoint,
};
pub use exit::{exit_time_survival, SurvivalCurve};
pub use lower::{
    asymptotic_slope_check, beta_critical, dirichlet_eigenvalue_upper, lower_exponent, p_critical, q_lower, q_sup,
    q_sup_refined, DirichletBound, GrowthCase, QSup, SlopeAxis, SlopeReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperbolic::{ModelPoint, RadialFunction, RadialProfile};
use crate::kernels::{KernelTable, NoiseSpec, TableGrid};
use crate::ledger::ConstantLedger;
use crate::specialfn::QuadratureSpec;

/// Initial datum, radial about the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// u₀ ≡ ε.
    Constant { epsilon: f64 },
    /// u₀ = ε on B(x, R), 0 outside.
    Bump { epsilon: f64, radius: f64 },
}

impl InitialCondition {
    pub fn epsilon(&self) -> f64 {
        match *self {
            InitialCondition::Constant { epsilon } | InitialCondition::Bump { epsilon, .. } => epsilon,
        }
    }

    /// Radius of the ball on which u₀ ≥ ε (infinite for constant data).
    pub fn radius(&self) -> f64 {
        match *self {
            InitialCondition::Constant { .. } => f64::INFINITY,
            InitialCondition::Bump { radius, .. } => radius,
        }
    }

    pub fn profile(&self) -> RadialProfile {
        match *self {
            InitialCondition::Constant { epsilon } => RadialProfile::Constant { value: epsilon },
            InitialCondition::Bump { epsilon, radius } => RadialProfile::Ball { epsilon, radius },
        }
    }

    /// As a radial function about `center`.
    pub fn at(&self, center: ModelPoint) -> Result<RadialFunction> {
        RadialFunction::new(center, self.profile())
    }

    #[inline]
    pub(crate) fn ln_value(&self, d: f64) -> f64 {
        match *self {
            InitialCondition::Constant { epsilon } => epsilon.ln(),
            InitialCondition::Bump { epsilon, radius } => {
                if d <= radius {
                    epsilon.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// Which correlation kernel drives the Feynman–Kac exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FkKernelMode {
    /// G_{2α} from the exact heat kernel (n = 3).
    Exact,
    /// The closed-form lower bound Ḡ_{2α}.
    Lower,
}

/// Direction of the systematic error of an estimate beyond time discretization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Bias {
    Unbiased,
    Lower,
}

/// Configuration of a Feynman–Kac run. Paths start at the basepoint and u₀ is
/// radial about it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FkConfig {
    pub spec: NoiseSpec,
    pub p: u32,
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub u0: InitialCondition,
    pub kernel_mode: FkKernelMode,
    /// Distance floor for singular kernels; G is capped at G(delta_floor).
    pub delta_floor: f64,
    pub workers: usize,
}

impl FkConfig {
    /// Defaults: u₀ ≡ 1, exact kernel, δ_floor = 10⁻³/√K, one worker.
    pub fn new(spec: NoiseSpec, p: u32, t_end: f64, dt: f64, n_paths: u64, seed: u64) -> Self {
        Self {
            spec,
            p,
            t_end,
            dt,
            n_paths,
            seed,
            u0: InitialCondition::Constant { epsilon: 1.0 },
            kernel_mode: FkKernelMode::Exact,
            delta_floor: 1e-3 / spec.curvature.sqrt(),
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.require_dalang()?;
        if self.p < 2 {
            return Err(Error::Config(format!("p must be an integer >= 2, got {}", self.p)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.dt > 0.0) || self.dt > self.t_end * (1.0 + 1e-12) {
            return Err(Error::Config(format!("dt must lie in (0, t_end], got {}", self.dt)));
        }
        if self.n_paths < 2 {
            return Err(Error::Config("n_paths must be at least 2".into()));
        }
        let eps = self.u0.epsilon();
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Config(format!("u0 epsilon must be positive and finite, got {eps}")));
        }
        if !(self.u0.radius() > 0.0) {
            return Err(Error::Config("u0 radius must be positive".into()));
        }
        if !(self.delta_floor > 0.0) {
            return Err(Error::Config("delta_floor must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.kernel_mode == FkKernelMode::Exact && self.spec.n != 3 {
            return Err(Error::Mode {
                mode: "EXACT_N3",
                n: self.spec.n,
            });
        }
        Ok(())
    }

    /// Tabulates the kernel G_{2α} (or its lower bound) used by the estimator.
    pub fn kernel_table(&self, ledger: &ConstantLedger) -> Result<KernelTable> {
        let cov = self.spec.covariance_kernel();
        let sk = self.spec.curvature.sqrt();
        let grid = TableGrid {
            d_min: (1e-4 / sk).min(self.delta_floor),
            d_max: 40.0 / sk,
            per_decade: 24,
        };
        match self.kernel_mode {
            FkKernelMode::Exact => KernelTable::build(
                &cov,
                crate::hyperbolic::HeatKernelMode::ExactN3,
                &grid,
                &QuadratureSpec::default(),
            ),
            FkKernelMode::Lower => KernelTable::lower_bound(&cov, ledger, &grid),
        }
    }
}

/// A Monte Carlo estimate of E[u(t,x)^p].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub p: u32,
    pub t: f64,
    /// exp(log_mean); infinite only when `overflow` is set.
    pub mean: f64,
    pub stderr: f64,
    pub log_mean: f64,
    /// Standard error of the mean divided by the mean.
    pub relative_stderr: f64,
    pub n_paths: u64,
    pub bias: Bias,
    /// The mean does not fit in an f64; use `log_mean`.
    pub overflow: bool,
}
