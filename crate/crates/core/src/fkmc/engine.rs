use serde::{Deserialize, Serialize};

use super::{Bias, FkConfig, FkKernelMode, MomentEstimate};
use crate::error::{Error, Result};
use crate::exec::{blocks, map_ordered, stream_rng};
use crate::hyperbolic::{distance_unchecked, BrownianStepper, ModelPoint};
use crate::kernels::{KernelTable, NoiseSpec};
use crate::ledger::ConstantLedger;
use crate::stats::{LogWelford, Welford};

/// Per-block accumulators: `moments[snapshot][order]` of Π u₀·e^{β²S} and,
/// for each snapshot, plain statistics of the two-path exponent 2∫G.
#[derive(Clone)]
struct BlockResult {
    moments: Vec<Vec<LogWelford>>,
    pair: Vec<Welford>,
    capped: bool,
}

impl BlockResult {
    fn empty(snapshots: usize, orders: usize) -> Self {
        Self {
            moments: vec![vec![LogWelford::new(); orders]; snapshots],
            pair: vec![Welford::new(); snapshots],
            capped: false,
        }
    }

    fn merge(&self, other: &Self) -> Self {
        Self {
            moments: self
                .moments
                .iter()
                .zip(&other.moments)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.merge(y)).collect())
                .collect(),
            pair: self.pair.iter().zip(&other.pair).map(|(a, b)| a.merge(b)).collect(),
            capped: self.capped || other.capped,
        }
    }
}

/// Uniform step grid on [0, t_max] and the step index of each requested time.
fn snapshot_steps(times: &[f64], dt: f64) -> Result<(usize, Vec<usize>)> {
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        if !(t > 0.0) {
            return Err(Error::Config(format!("snapshot times must be positive, got {t}")));
        }
        let k = (t / dt).round();
        if k < 1.0 || (k * dt - t).abs() > 1e-9 * t.max(dt) {
            return Err(Error::Config(format!("time {t} is not a multiple of dt = {dt}")));
        }
        steps.push(k as usize);
    }
    let mut sorted = steps.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("snapshot times must be distinct".into()));
    }
    Ok(((t_max / dt).round() as usize, steps))
}

/// Simulates `cfg.n_paths` replicates of `cfg.p` paths on a uniform grid and
/// records every order in `orders` (each ≤ p, using the first paths) at the
/// given step indices.
fn run(cfg: &FkConfig, table: &KernelTable, total_steps: usize, snaps: &[usize], orders: &[u32]) -> BlockResult {
    let n = cfg.spec.n;
    let k = cfg.spec.curvature;
    let dim = n + 1;
    let p = cfg.p as usize;
    let beta2 = cfg.spec.beta * cfg.spec.beta;
    let origin = ModelPoint::basepoint(n, k).expect("validated dimension and curvature");
    let origin = origin.coords().to_vec();
    let dt = cfg.dt;
    let floor = cfg.delta_floor;
    let (g0, cap0) = match table.value_at_zero() {
        Some(v) => (v, false),
        None => (table.eval(floor), true),
    };
    // Pairs ordered so that those among the first q paths come first.
    let pairs: Vec<(usize, usize)> = (1..p).flat_map(|b| (0..b).map(move |a| (a, b))).collect();
    // Snapshot slot for each step, if any.
    let mut slot = vec![usize::MAX; total_steps + 1];
    for (i, &s) in snaps.iter().enumerate() {
        slot[s] = i;
    }
    let u0 = cfg.u0;

    let per_block = map_ordered(blocks(cfg.n_paths), cfg.workers, |(b, _, len)| {
        let mut rng = stream_rng(cfg.seed, b);
        let mut stepper = BrownianStepper::new(n, k);
        let mut coords = vec![0.0; p * dim];
        let mut integral = vec![0.0; pairs.len()];
        let mut g_prev = vec![0.0; pairs.len()];
        let mut out = BlockResult::empty(snaps.len(), orders.len());
        out.capped = cap0;
        for _ in 0..len {
            for j in 0..p {
                coords[j * dim..(j + 1) * dim].copy_from_slice(&origin);
            }
            integral.iter_mut().for_each(|v| *v = 0.0);
            g_prev.iter_mut().for_each(|v| *v = g0);
            for step in 1..=total_steps {
                for j in 0..p {
                    stepper.step(&mut coords[j * dim..(j + 1) * dim], dt, &mut rng);
                }
                for (idx, &(a, c)) in pairs.iter().enumerate() {
                    let d = distance_unchecked(&coords[a * dim..(a + 1) * dim], &coords[c * dim..(c + 1) * dim], k);
                    let (g, capped) = table.eval_floored(d, floor);
                    out.capped |= capped;
                    integral[idx] += 0.5 * dt * (g_prev[idx] + g);
                    g_prev[idx] = g;
                }
                let s = slot[step];
                if s == usize::MAX {
                    continue;
                }
                out.pair[s].push(2.0 * integral[0]);
                for (oi, &q) in orders.iter().enumerate() {
                    let q = q as usize;
                    let npairs = q * (q - 1) / 2;
                    let exponent: f64 = integral[..npairs].iter().sum();
                    let mut lv = 2.0 * beta2 * exponent;
                    for j in 0..q {
                        let d = distance_unchecked(&origin, &coords[j * dim..(j + 1) * dim], k);
                        lv += u0.ln_value(d);
                    }
                    out.moments[s][oi].push(lv);
                }
            }
        }
        out
    });
    per_block
        .iter()
        .fold(BlockResult::empty(snaps.len(), orders.len()), |a, b| a.merge(b))
}

fn bias_of(cfg: &FkConfig, capped: bool) -> Bias {
    if cfg.kernel_mode == FkKernelMode::Lower || capped {
        Bias::Lower
    } else {
        Bias::Unbiased
    }
}

fn to_estimate(acc: &LogWelford, p: u32, t: f64, bias: Bias) -> MomentEstimate {
    let log_mean = acc.log_mean();
    let mean = log_mean.exp();
    let rel = acc.relative_stderr();
    MomentEstimate {
        p,
        t,
        mean,
        stderr: acc.log_stderr().exp(),
        log_mean,
        relative_stderr: rel,
        n_paths: acc.count,
        bias,
        overflow: mean.is_infinite(),
    }
}

/// E[u(t,x)^p] = E[Π_j u₀(B^j_t) exp(β² Σ_{i≠k} ∫₀ᵗ G_{2α}(d(B^i_s, B^k_s)) ds)]
/// by Monte Carlo; the time integrals use the trapezoid rule on the path grid.
pub fn moment_estimate(cfg: &FkConfig, ledger: &ConstantLedger) -> Result<MomentEstimate> {
    cfg.validate()?;
    let table = cfg.kernel_table(ledger)?;
    moment_estimate_with(cfg, &table)
}

/// As [`moment_estimate`] with a prebuilt kernel table.
pub fn moment_estimate_with(cfg: &FkConfig, table: &KernelTable) -> Result<MomentEstimate> {
    cfg.validate()?;
    let series = moment_series_with(cfg, table, &[cfg.t_end])?;
    Ok(series[0])
}

/// Moments of order `cfg.p` at each time in `times` from one path ensemble.
pub fn moment_series_with(cfg: &FkConfig, table: &KernelTable, times: &[f64]) -> Result<Vec<MomentEstimate>> {
    cfg.validate()?;
    if times.is_empty() {
        return Err(Error::Config("no snapshot times".into()));
    }
    let (total, steps) = snapshot_steps(times, cfg.dt)?;
    let res = run(cfg, table, total, &steps, &[cfg.p]);
    let bias = bias_of(cfg, res.capped);
    Ok(times
        .iter()
        .enumerate()
        .map(|(i, &t)| to_estimate(&res.moments[i][0], cfg.p, t, bias))
        .collect())
}

/// Coefficient of β² in E[u(t,x)²] − 1 for u₀ ≡ 1: 2∫₀ᵗ E[G_{2α}(d(B¹_s, B²_s))] ds.
pub fn chaos_k1_estimate(
    spec: &NoiseSpec,
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
) -> Result<MomentEstimate> {
    let mut cfg = FkConfig::new(*spec, 2, t, dt, n_paths, seed);
    cfg.workers = workers;
    cfg.validate()?;
    let table = cfg.kernel_table(&ConstantLedger::for_dimension(spec.n)?)?;
    chaos_k1_estimate_with(&cfg, &table)
}

/// As [`chaos_k1_estimate`] on the paths of `cfg` (its β and u₀ are ignored).
pub fn chaos_k1_estimate_with(cfg: &FkConfig, table: &KernelTable) -> Result<MomentEstimate> {
    cfg.validate()?;
    let (total, steps) = snapshot_steps(&[cfg.t_end], cfg.dt)?;
    let res = run(cfg, table, total, &steps, &[2]);
    let w = res.pair[0];
    Ok(MomentEstimate {
        p: 2,
        t: cfg.t_end,
        mean: w.mean,
        stderr: w.stderr(),
        log_mean: w.mean.ln(),
        relative_stderr: if w.mean > 0.0 { w.stderr() / w.mean } else { 0.0 },
        n_paths: w.count,
        bias: bias_of(cfg, res.capped),
        overflow: false,
    })
}

/// E[u^p]^{1/p} / E[u^q]^{1/q} at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioPoint {
    pub t: f64,
    pub ratio: f64,
    pub log_ratio: f64,
    /// Standard error of `log_ratio`, ignoring the (positive) correlation of
    /// the two moments, which makes it conservative.
    pub log_ratio_stderr: f64,
    pub stderr: f64,
    pub moment_p: MomentEstimate,
    pub moment_q: MomentEstimate,
}

/// Intermittency ratios at each time of `t_grid`, from one ensemble of p
/// paths per replicate; the q-th moment reuses the first q of them.
pub fn intermittency_ratio(
    p: u32,
    q: u32,
    t_grid: &[f64],
    cfg: &FkConfig,
    ledger: &ConstantLedger,
) -> Result<Vec<RatioPoint>> {
    let mut cfg = *cfg;
    cfg.p = p;
    cfg.t_end = t_grid.iter().cloned().fold(0.0, f64::max);
    cfg.validate()?;
    if q < 2 || q > p {
        return Err(Error::Config(format!("need 2 <= q <= p, got p={p}, q={q}")));
    }
    let table = cfg.kernel_table(ledger)?;
    let (total, steps) = snapshot_steps(t_grid, cfg.dt)?;
    let res = run(&cfg, &table, total, &steps, &[p, q]);
    let bias = bias_of(&cfg, res.capped);
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mp = to_estimate(&res.moments[i][0], p, t, bias);
            let mq = to_estimate(&res.moments[i][1], q, t, bias);
            let (log_ratio, se) = if p == q {
                (0.0, 0.0)
            } else {
                let a = mp.relative_stderr / p as f64;
                let b = mq.relative_stderr / q as f64;
                (mp.log_mean / p as f64 - mq.log_mean / q as f64, (a * a + b * b).sqrt())
            };
            let ratio = log_ratio.exp();
            RatioPoint {
                t,
                ratio,
                log_ratio,
                log_ratio_stderr: se,
                stderr: ratio * se,
                moment_p: mp,
                moment_q: mq,
            }
        })
        .collect())
}
