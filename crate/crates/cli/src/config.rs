//! Experiment configuration: a TOML tree with dotted-key overrides.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use hyperpam::fkmc::{FkConfig, FkKernelMode, InitialCondition};
use hyperpam::kernels::NoiseSpec;
use hyperpam::ledger::ConstantLedger;
use hyperpam::renewal::BoundConfig;

/// Serializes infinite exponents as the string "inf" so JSON echoes survive.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Int(i64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Int(v) => Ok(v as f64),
            Raw::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                other => other
                    .parse()
                    .map_err(|_| serde::de::Error::custom(format!("expected a number or \"inf\", got {s:?}"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Model {
    pub n: usize,
    #[serde(rename = "K")]
    pub curvature: f64,
}

impl Default for Model {
    fn default() -> Self {
        Self { n: 3, curvature: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Noise {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for Noise {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Moment {
    pub p: u32,
    /// Integrability exponent of u₀ for the upper bounds.
    #[serde(with = "extended_float")]
    pub r: f64,
    /// Lower order of the intermittency ratio.
    pub q: u32,
}

impl Default for Moment {
    fn default() -> Self {
        Self {
            p: 2,
            r: f64::INFINITY,
            q: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mc {
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: u64,
    pub seed: u64,
    pub workers: usize,
    /// Snapshot times of the intermittency series.
    pub times: Vec<f64>,
}

impl Default for Mc {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            dt: 0.01,
            n_paths: 10_000,
            seed: 1,
            workers: 1,
            times: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum U0Kind {
    Constant,
    Bump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct U0 {
    pub kind: U0Kind,
    pub epsilon: f64,
    #[serde(rename = "R")]
    pub radius: f64,
}

impl Default for U0 {
    fn default() -> Self {
        Self {
            kind: U0Kind::Constant,
            epsilon: 1.0,
            radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Kernel {
    pub mode: FkKernelMode,
    /// Defaults to 10⁻³/√K.
    pub delta_floor: Option<f64>,
}

impl Default for Kernel {
    fn default() -> Self {
        Self {
            mode: FkKernelMode::Exact,
            delta_floor: None,
        }
    }
}

/// Parameter grids of `bounds` and `phase-diagram`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Sweep {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
    pub p_min: u32,
    pub p_max: u32,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            beta_min: 0.1,
            beta_max: 100.0,
            beta_points: 13,
            p_min: 2,
            p_max: 8,
        }
    }
}

/// Grids of `slope-check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Slope {
    pub beta_min: f64,
    pub beta_max: f64,
    pub beta_points: usize,
    pub p_min: u32,
    pub p_max: u32,
    /// β held fixed along the p axis.
    pub beta_fixed: f64,
}

impl Default for Slope {
    fn default() -> Self {
        Self {
            beta_min: 1e2,
            beta_max: 1e4,
            beta_points: 9,
            p_min: 4,
            p_max: 32,
            beta_fixed: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub model: Model,
    pub noise: Noise,
    pub moment: Moment,
    pub mc: Mc,
    pub u0: U0,
    pub kernel: Kernel,
    pub sweep: Sweep,
    pub slope: Slope,
    /// Ledger overrides, e.g. `"chaos.C" = 2.0`.
    pub constants: BTreeMap<String, f64>,
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Applies `KEY=VALUE` to the tree. Keys below `constants.` keep their dots.
fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override {assignment:?} is not of the form KEY=VALUE"))?;
    let key = key.trim();
    let value = parse_value(raw.trim());
    let path: Vec<&str> = match key.strip_prefix("constants.") {
        Some(rest) if !rest.is_empty() => vec!["constants", rest],
        _ => key.split('.').collect(),
    };
    if path.iter().any(|s| s.is_empty()) {
        bail!("override key {key:?} has an empty segment");
    }
    let mut table = root;
    for seg in &path[..path.len() - 1] {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override key {key:?}: {seg:?} is not a table"))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

impl Config {
    /// Parses `text` then applies overrides; errors name the line or key.
    pub fn from_str_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut root: toml::Table = toml::from_str(text).context("config parse error")?;
        for o in overrides {
            apply_override(&mut root, o)?;
        }
        let cfg: Config = toml::Value::Table(root)
            .try_into()
            .context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        Self::from_str_with(&text, overrides)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.spec()?;
        spec.require_dalang()?;
        if self.mc.workers == 0 {
            bail!("mc.workers must be at least 1");
        }
        if self.sweep.beta_points == 0 || self.slope.beta_points == 0 {
            bail!("grids need at least one point");
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<NoiseSpec> {
        Ok(NoiseSpec::new(
            self.noise.alpha,
            self.noise.beta,
            self.model.n,
            self.model.curvature,
        )?)
    }

    /// Dimension defaults with the `constants` table applied as user values.
    pub fn ledger(&self) -> Result<ConstantLedger> {
        let mut ledger = ConstantLedger::for_dimension(self.model.n)?;
        for (k, v) in &self.constants {
            ledger.set_user(k, *v);
        }
        Ok(ledger)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.u0.kind {
            U0Kind::Constant => InitialCondition::Constant {
                epsilon: self.u0.epsilon,
            },
            U0Kind::Bump => InitialCondition::Bump {
                epsilon: self.u0.epsilon,
                radius: self.u0.radius,
            },
        }
    }

    /// Search range of the lower bound: R for a bump, unbounded otherwise.
    pub fn r_max(&self) -> f64 {
        match self.u0.kind {
            U0Kind::Constant => f64::INFINITY,
            U0Kind::Bump => self.u0.radius,
        }
    }

    pub fn fk_config(&self) -> Result<FkConfig> {
        let spec = self.spec()?;
        let mut cfg = FkConfig::new(
            spec,
            self.moment.p,
            self.mc.t_end,
            self.mc.dt,
            self.mc.n_paths,
            self.mc.seed,
        );
        cfg.u0 = self.initial_condition();
        cfg.kernel_mode = self.kernel.mode;
        if let Some(f) = self.kernel.delta_floor {
            cfg.delta_floor = f;
        }
        cfg.workers = self.mc.workers;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn bound_config(&self, ledger: &ConstantLedger) -> Result<BoundConfig> {
        Ok(BoundConfig::from_ledger(self.spec()?, self.moment.r, ledger)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(Config::from_str_with("", &[]).unwrap(), Config::default());
    }

    #[test]
    fn overrides_reach_nested_and_dotted_keys() {
        let o = vec![
            "noise.beta=2.5".to_string(),
            "constants.chaos.C=3".to_string(),
            "u0.kind=bump".to_string(),
            "moment.r = 4".to_string(),
        ];
        let c = Config::from_str_with("[model]\nn = 3\n", &o).unwrap();
        assert_eq!(c.noise.beta, 2.5);
        assert_eq!(c.constants["chaos.C"], 3.0);
        assert_eq!(c.u0.kind, U0Kind::Bump);
        assert_eq!(c.moment.r, 4.0);
        assert_eq!(c.ledger().unwrap().value("chaos.C"), 3.0);
    }

    #[test]
    fn infinite_exponent_round_trips() {
        let c = Config::default();
        let text = c.to_toml().unwrap();
        assert_eq!(Config::from_str_with(&text, &[]).unwrap(), c);
        let json = serde_json::to_string(&c).unwrap();
        let back: Config = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = Config::from_str_with("[noise]\nalpah = 1.0\n", &[]).unwrap_err();
        assert!(format!("{e:#}").contains("alpah"), "{e:#}");
    }

    #[test]
    fn parse_error_reports_line() {
        let e = Config::from_str_with("[model]\nn = 3\nK = = 1\n", &[]).unwrap_err();
        assert!(format!("{e:#}").contains("line 3"), "{e:#}");
    }

    #[test]
    fn dalang_violation_prints_threshold() {
        let e = Config::from_str_with("[noise]\nalpha = 0.2\n", &[]).unwrap_err();
        assert!(format!("{e:#}").contains("0.25"), "{e:#}");
    }
}
