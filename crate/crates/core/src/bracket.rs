use serde::{Deserialize, Serialize};

/// Whether a value is exact or one side of a two-sided bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BracketMode {
    Exact,
    Lower,
    Upper,
}

impl BracketMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BracketMode::Exact => "EXACT",
            BracketMode::Lower => "LOWER",
            BracketMode::Upper => "UPPER",
        }
    }
}

/// A kernel evaluation tagged with its bound direction.
///
/// `alpha` is the fractional order for `G_α` values and `None` for heat
/// kernel values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBracket {
    pub value: f64,
    pub mode: BracketMode,
    pub alpha: Option<f64>,
    pub d: f64,
}
