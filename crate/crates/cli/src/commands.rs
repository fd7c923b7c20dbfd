use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;

use hyperpam::fkmc::{
    asymptotic_slope_check, beta_critical, chaos_k1_estimate_with, intermittency_ratio, lower_exponent,
    moment_estimate_with, p_critical, q_sup, Bias, FkConfig, MomentEstimate, SlopeAxis, SlopeReport,
};
use hyperpam::hyperbolic::{brownian_path, distance, heat_kernel, HeatKernelMode, ModelPoint, PathSeed};
use hyperpam::kernels::{calibrate_gbar, KernelTable, TableGrid};
use hyperpam::ledger::ConstantLedger;
use hyperpam::renewal::{bound_row, f_profile, theta_threshold};
use hyperpam::specialfn::QuadratureSpec;
use hyperpam::stats::{logspace, Welford};
use hyperpam::validate::quick_suite;

use crate::config::Config;
use crate::output::Run;

fn beta_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        vec![lo]
    } else {
        logspace(lo, hi, points)
    }
}

fn csv_bytes(header: &str, rows: impl Iterator<Item = String>) -> Vec<u8> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s.into_bytes()
}

pub fn kernel_table(cfg: &Config, ledger: &mut ConstantLedger, run: &mut Run) -> Result<()> {
    let spec = cfg.spec()?;
    let sk = spec.curvature.sqrt();
    let grid = TableGrid {
        d_min: 1e-3 / sk,
        d_max: 20.0 / sk,
        per_decade: 12,
    };
    let quad = QuadratureSpec::default();
    let modes = if spec.n == 3 {
        vec![("kernel_exact.csv", HeatKernelMode::ExactN3)]
    } else {
        vec![
            ("kernel_upper.csv", HeatKernelMode::dm_upper(ledger)),
            ("kernel_lower_dm.csv", HeatKernelMode::dm_lower(ledger)),
        ]
    };
    for (name, mode) in &modes {
        let table = KernelTable::build(&spec, *mode, &grid, &quad)?;
        let mut buf = Vec::new();
        table.write_csv(&mut buf)?;
        run.write_bytes(name, &buf)?;
    }
    if spec.n == 3 {
        let nodes = grid.nodes()?;
        calibrate_gbar(&spec, &nodes, &quad, ledger)?;
    }
    let gbar = KernelTable::lower_bound(&spec, ledger, &grid)?;
    let mut buf = Vec::new();
    gbar.write_csv(&mut buf)?;
    run.write_bytes("kernel_gbar.csv", &buf)?;

    let heat_mode = if spec.n == 3 {
        HeatKernelMode::ExactN3
    } else {
        HeatKernelMode::dm_upper(ledger)
    };
    let mut rows = Vec::new();
    for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
        for i in 0..=100 {
            let d = 0.1 * i as f64 / sk;
            let b = heat_kernel(t, d, spec.n, spec.curvature, heat_mode)?;
            rows.push(format!("{t},{d},{},{}", b.value, b.mode.as_str()));
        }
    }
    run.write_bytes("heat_kernel.csv", &csv_bytes("t,d,value,mode", rows.into_iter()))
}

#[derive(Serialize)]
struct RadialRow {
    time: f64,
    mean_distance: f64,
    stderr: f64,
    mean_speed: f64,
    expected_speed: f64,
}

pub fn bm_sample(cfg: &Config, run: &mut Run) -> Result<()> {
    let (n, k) = (cfg.model.n, cfg.model.curvature);
    let o = ModelPoint::basepoint(n, k)?;
    let paths: Vec<_> = (0..cfg.mc.n_paths)
        .map(|i| brownian_path(&o, cfg.mc.t_end, cfg.mc.dt, PathSeed::new(cfg.mc.seed, i)))
        .collect::<hyperpam::Result<_>>()?;
    let header = std::iter::once("path,step,time".to_string())
        .chain((0..=n).map(|i| format!("coord_{i}")))
        .collect::<Vec<_>>()
        .join(",");
    let mut rows = Vec::new();
    for (i, p) in paths.iter().take(16).enumerate() {
        for (s, (t, x)) in p.times.iter().zip(&p.points).enumerate() {
            let coords: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
            rows.push(format!("{i},{s},{t},{}", coords.join(",")));
        }
    }
    run.write_bytes("paths.csv", &csv_bytes(&header, rows.into_iter()))?;

    let steps = paths.first().map(|p| p.times.len()).unwrap_or(0);
    let stride = (steps / 200).max(1);
    let expected = (n as f64 - 1.0) * k.sqrt();
    let mut stats = Vec::new();
    for s in (stride..steps).step_by(stride) {
        let t = paths[0].times[s];
        let mut w = Welford::new();
        for p in &paths {
            w.push(distance(&o, &p.points[s])?);
        }
        stats.push(RadialRow {
            time: t,
            mean_distance: w.mean,
            stderr: w.stderr(),
            mean_speed: w.mean / t,
            expected_speed: expected,
        });
    }
    run.write_records("radial", &stats)
}

#[derive(Serialize)]
struct MomentRecord {
    kind: &'static str,
    n: usize,
    #[serde(rename = "K")]
    curvature: f64,
    alpha: f64,
    beta: f64,
    p: u32,
    t: f64,
    dt: f64,
    n_paths: u64,
    seed: u64,
    workers: usize,
    u0: String,
    epsilon: f64,
    #[serde(rename = "R")]
    radius: f64,
    kernel_mode: String,
    delta_floor: f64,
    mean: f64,
    stderr: f64,
    log_mean: f64,
    relative_stderr: f64,
    bias: Bias,
    overflow: bool,
    wall_time_s: f64,
}

fn moment_record(kind: &'static str, fk: &FkConfig, cfg: &Config, e: &MomentEstimate, wall: f64) -> MomentRecord {
    MomentRecord {
        kind,
        n: fk.spec.n,
        curvature: fk.spec.curvature,
        alpha: fk.spec.alpha,
        beta: fk.spec.beta,
        p: e.p,
        t: e.t,
        dt: fk.dt,
        n_paths: e.n_paths,
        seed: fk.seed,
        workers: fk.workers,
        u0: format!("{:?}", cfg.u0.kind).to_lowercase(),
        epsilon: cfg.u0.epsilon,
        radius: fk.u0.radius(),
        kernel_mode: format!("{:?}", fk.kernel_mode).to_uppercase(),
        delta_floor: fk.delta_floor,
        mean: e.mean,
        stderr: e.stderr,
        log_mean: e.log_mean,
        relative_stderr: e.relative_stderr,
        bias: e.bias,
        overflow: e.overflow,
        wall_time_s: wall,
    }
}

/// Moment estimate, the first chaos coefficient when the exact kernel is
/// available, and optionally the estimate at dt/2.
pub fn moment_mc(cfg: &Config, ledger: &ConstantLedger, run: &mut Run, check_dt: bool) -> Result<bool> {
    let fk = cfg.fk_config()?;
    let table = fk.kernel_table(ledger)?;
    let mut records = Vec::new();
    let start = Instant::now();
    let e = moment_estimate_with(&fk, &table)?;
    records.push(moment_record("moment", &fk, cfg, &e, start.elapsed().as_secs_f64()));
    println!("E[u^{}]({}) = {} ± {} ({:?})", e.p, e.t, e.mean, e.stderr, e.bias);
    let mut converged = true;
    if check_dt {
        let mut half = fk;
        half.dt = fk.dt / 2.0;
        let start = Instant::now();
        let h = moment_estimate_with(&half, &table)?;
        records.push(moment_record("moment_half_dt", &half, cfg, &h, start.elapsed().as_secs_f64()));
        let diff = (h.log_mean - e.log_mean).abs();
        let se = e.relative_stderr.max(h.relative_stderr);
        converged = diff < se;
        println!(
            "dt check: relative change {diff:.3e} vs stderr {se:.3e}: {}",
            if converged { "converged" } else { "NOT converged" }
        );
    }
    if fk.spec.n == 3 && fk.kernel_mode == hyperpam::fkmc::FkKernelMode::Exact {
        let mut two = fk;
        two.p = 2;
        let start = Instant::now();
        let c = chaos_k1_estimate_with(&two, &table)?;
        records.push(moment_record("chaos_k1", &two, cfg, &c, start.elapsed().as_secs_f64()));
    }
    run.write_records("moments", &records)?;
    Ok(converged)
}

#[derive(Serialize)]
struct LowerRow {
    beta: f64,
    p: u32,
    q_sup: f64,
    r_star: f64,
    lower_exponent: f64,
}

pub fn bounds(cfg: &Config, ledger: &ConstantLedger, run: &mut Run) -> Result<()> {
    let spec = cfg.spec()?;
    let bc = cfg.bound_config(ledger)?;
    let betas = beta_grid(cfg.sweep.beta_min, cfg.sweep.beta_max, cfg.sweep.beta_points);
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &beta in &betas {
        for p in cfg.sweep.p_min.max(2)..=cfg.sweep.p_max {
            upper.push(bound_row(beta, p, &bc)?);
            let q = q_sup(p, beta, &spec, ledger, cfg.r_max())?;
            lower.push(LowerRow {
                beta,
                p,
                q_sup: q.value,
                r_star: q.r_star,
                lower_exponent: lower_exponent(p, beta, &spec, ledger, cfg.r_max())?,
            });
        }
    }
    run.write_records("bounds", &upper)?;
    run.write_records("lower_bounds", &lower)?;
    let i = bc.regime();
    let mut rows = vec![format!("0,{}", f_profile(i, 0.0, &bc)?)];
    for rho in logspace(1e-3, 1e4, 71) {
        rows.push(format!("{rho},{}", f_profile(i, rho, &bc)?));
    }
    run.write_bytes("f_profile.csv", &csv_bytes("rho,F", rows.into_iter()))?;
    println!("Θ threshold 1/sqrt(C F(0)) = {}", theta_threshold(&bc)?);
    Ok(())
}

#[derive(Serialize)]
struct PhaseRow {
    beta: f64,
    p: u32,
    upper_exponent: f64,
    lower_exponent: f64,
    upper_sign: i8,
    lower_sign: i8,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn phase_diagram(cfg: &Config, ledger: &ConstantLedger, run: &mut Run) -> Result<()> {
    let spec = cfg.spec()?;
    let bc = cfg.bound_config(ledger)?;
    let betas = beta_grid(cfg.sweep.beta_min, cfg.sweep.beta_max, cfg.sweep.beta_points);
    let ps: Vec<u32> = (cfg.sweep.p_min.max(2)..=cfg.sweep.p_max).collect();
    let mut grid = Vec::new();
    for &beta in &betas {
        for &p in &ps {
            let u = bound_row(beta, p, &bc)?.upper_exponent;
            let l = lower_exponent(p, beta, &spec, ledger, cfg.r_max())?;
            grid.push(PhaseRow {
                beta,
                p,
                upper_exponent: u,
                lower_exponent: l,
                upper_sign: sign(u),
                lower_sign: sign(l),
            });
        }
    }
    run.write_records("phase", &grid)?;
    let bcs: Vec<String> = ps
        .iter()
        .map(|&p| beta_critical(p, &spec, ledger, cfg.r_max()).map(|b| format!("{p},{b}")))
        .collect::<hyperpam::Result<_>>()?;
    run.write_bytes("beta_critical.csv", &csv_bytes("p,beta_critical", bcs.into_iter()))?;
    let pcs: Vec<String> = betas
        .iter()
        .map(|&b| match p_critical(b, &spec, ledger, cfg.r_max()) {
            Ok(p) => format!("{b},{p}"),
            Err(_) => format!("{b},"),
        })
        .collect();
    run.write_bytes("p_critical.csv", &csv_bytes("beta,p_critical", pcs.into_iter()))
}

#[derive(Serialize)]
struct SlopePoint {
    axis: SlopeAxis,
    parameter: f64,
    abscissa: f64,
    exponent: f64,
}

fn report_line(r: &SlopeReport) -> String {
    let verdict = match r.pass {
        Some(true) => "PASS",
        Some(false) => "FAIL",
        None => "reported only",
    };
    format!(
        "{:?} axis, case {:?}: fitted slope {:.4} ± {:.4}, claimed {:.4}, balance {:?}, spread {:?}: {verdict}",
        r.axis, r.case, r.fitted_slope, r.slope_stderr, r.claimed_slope, r.balance_slope, r.spread
    )
}

pub fn slope_check(cfg: &Config, ledger: &ConstantLedger, run: &mut Run) -> Result<bool> {
    let spec = cfg.spec()?;
    let s = &cfg.slope;
    let betas = beta_grid(s.beta_min, s.beta_max, s.beta_points);
    let ps: Vec<f64> = (s.p_min.max(2)..=s.p_max).map(|p| p as f64).collect();
    let reports = vec![
        asymptotic_slope_check(SlopeAxis::Beta, &betas, cfg.moment.p as f64, &spec, ledger)?,
        asymptotic_slope_check(SlopeAxis::P, &ps, s.beta_fixed, &spec, ledger)?,
    ];
    let mut points = Vec::new();
    for r in &reports {
        println!("{}", report_line(r));
        for i in 0..r.grid.len() {
            points.push(SlopePoint {
                axis: r.axis,
                parameter: r.grid[i],
                abscissa: r.abscissa[i],
                exponent: r.exponents[i],
            });
        }
    }
    run.write_records("slope_series", &points)?;
    run.write_json("slope_report.json", &reports)?;
    Ok(reports.iter().all(|r| r.pass != Some(false)))
}

#[derive(Serialize)]
struct RatioRow {
    t: f64,
    p: u32,
    q: u32,
    ratio: f64,
    stderr: f64,
    log_ratio: f64,
    log_ratio_stderr: f64,
    log_moment_p: f64,
    log_moment_q: f64,
    bias: Bias,
}

pub fn intermittency(cfg: &Config, ledger: &ConstantLedger, run: &mut Run) -> Result<()> {
    let fk = cfg.fk_config()?;
    let (p, q) = (cfg.moment.p, cfg.moment.q);
    if q > p {
        bail!("moment.q = {q} must not exceed moment.p = {p}");
    }
    let pts = intermittency_ratio(p, q, &cfg.mc.times, &fk, ledger)?;
    let rows: Vec<RatioRow> = pts
        .iter()
        .map(|r| RatioRow {
            t: r.t,
            p,
            q,
            ratio: r.ratio,
            stderr: r.stderr,
            log_ratio: r.log_ratio,
            log_ratio_stderr: r.log_ratio_stderr,
            log_moment_p: r.moment_p.log_mean,
            log_moment_q: r.moment_q.log_mean,
            bias: r.moment_p.bias,
        })
        .collect();
    run.write_records("intermittency", &rows)
}

pub fn validate(cfg: &Config, run: &mut Run) -> Result<bool> {
    let checks = quick_suite(cfg.mc.workers);
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        println!(
            "{}  {:width$}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    run.write_records("validate", &checks)?;
    Ok(checks.iter().all(|c| c.passed))
}

