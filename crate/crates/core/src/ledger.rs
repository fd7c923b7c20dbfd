//! Registry of the constants left unpinned by the bounds: the chaos constant,
//! the two-sided heat kernel constants, the correlation lower-bound constant,
//! the Dirichlet eigenvalue constant and the semigroup decay constant.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::specialfn::bessel_j_first_zero;

pub const CHAOS_C: &str = "chaos.C";
pub const DM_C_LOWER: &str = "dm.c_lower";
pub const DM_C_UPPER: &str = "dm.C_upper";
pub const GBAR_C: &str = "gbar.C";
pub const DIRICHLET_C: &str = "dirichlet.c_n";
pub const DECAY_C: &str = "decay.C";

/// Key of the correlation lower-bound constant for kernel order `order`.
pub fn gbar_key(order: f64) -> String {
    format!("{GBAR_C}[{order}]")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Default,
    Calibrated,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub value: f64,
    pub provenance: Provenance,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstantLedger {
    entries: BTreeMap<String, LedgerEntry>,
}

impl ConstantLedger {
    /// Defaults for the model space of dimension `n`.
    ///
    /// In n = 3 the ratio P¹_t(r)/h(t,r) = (4π)^{-3/2}·r e^r /((1+r) sinh r)
    /// lies in [(4π)^{-3/2}, 2(4π)^{-3/2}], which pins both heat kernel constants.
    pub fn for_dimension(n: usize) -> Result<Self> {
        let mut ledger = Self::default();
        ledger.insert(CHAOS_C, 1.0, Provenance::Default, "renewal chaos constant");
        if n == 3 {
            let base = (4.0 * PI).powf(-1.5);
            ledger.insert(DM_C_LOWER, base, Provenance::Calibrated, "inf of P/h over r >= 0 (n=3)");
            ledger.insert(DM_C_UPPER, 2.0 * base, Provenance::Calibrated, "sup of P/h over r >= 0 (n=3)");
        } else {
            ledger.insert(DM_C_LOWER, 1.0, Provenance::Default, "heat kernel lower constant");
            ledger.insert(DM_C_UPPER, 1.0, Provenance::Default, "heat kernel upper constant");
        }
        ledger.insert(GBAR_C, 1.0, Provenance::Default, "correlation lower-bound constant");
        let j = bessel_j_first_zero(n as f64 / 2.0 - 1.0)?;
        ledger.insert(DIRICHLET_C, j * j, Provenance::Default, "flat-ball Dirichlet constant j_{n/2-1,1}^2");
        ledger.insert(DECAY_C, 1.0, Provenance::Default, "semigroup decay constant");
        Ok(ledger)
    }

    pub fn insert(&mut self, key: &str, value: f64, provenance: Provenance, note: &str) {
        self.entries.insert(
            key.to_string(),
            LedgerEntry {
                value,
                provenance,
                note: note.to_string(),
            },
        );
    }

    pub fn set_user(&mut self, key: &str, value: f64) {
        let note = self.entries.get(key).map(|e| e.note.clone()).unwrap_or_default();
        self.insert(key, value, Provenance::User, &note);
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.entries.get(key).map(|e| e.value)
    }

    /// Value of `key`, or 1 when absent.
    pub fn value(&self, key: &str) -> f64 {
        self.get(key).unwrap_or(1.0)
    }

    /// Constant of the lower bound for `G_order`: the order-specific entry,
    /// else the shared `gbar.C`, else 1.
    pub fn gbar(&self, order: f64) -> f64 {
        self.get(&gbar_key(order)).or_else(|| self.get(GBAR_C)).unwrap_or(1.0)
    }

    pub fn entry(&self, key: &str) -> Option<&LedgerEntry> {
        self.entries.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LedgerEntry)> {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_for_three_dimensions() {
        let l = ConstantLedger::for_dimension(3).unwrap();
        assert!((l.value(DIRICHLET_C) - PI * PI).abs() < 1e-10);
        assert_eq!(l.value(CHAOS_C), 1.0);
        assert_eq!(l.entry(DM_C_LOWER).unwrap().provenance, Provenance::Calibrated);
    }

    #[test]
    fn user_override_is_recorded() {
        let mut l = ConstantLedger::for_dimension(2).unwrap();
        l.set_user(CHAOS_C, 2.5);
        assert_eq!(l.value(CHAOS_C), 2.5);
        assert_eq!(l.entry(CHAOS_C).unwrap().provenance, Provenance::User);
        assert_eq!(l.value("missing"), 1.0);
    }
}
