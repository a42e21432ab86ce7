//! Minimum slack ratios stored between runs to catch silent numeric drift.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::report::group_key;
use crate::error::{Error, Result};
use crate::record::VerificationRecord;

/// Allowed relative change of a stored minimum slack.
pub const DEFAULT_DRIFT: f64 = 0.10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// `model|check|p=..` → minimum finite slack ratio.
    pub min_slack: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drift {
    pub key: String,
    pub stored: f64,
    pub current: Option<f64>,
    pub relative: f64,
}

impl Baseline {
    /// Minimum finite slack per group; groups whose slack is infinite
    /// everywhere (e.g. nonpositive left sides) are left out.
    pub fn from_records(records: &[VerificationRecord]) -> Self {
        let mut min_slack: BTreeMap<String, f64> = BTreeMap::new();
        for r in records.iter().filter(|r| r.slack_ratio.is_finite()) {
            let e = min_slack.entry(group_key(r)).or_insert(f64::INFINITY);
            *e = e.min(r.slack_ratio);
        }
        Baseline { min_slack }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Entries of `self` whose counterpart in `current` is missing or moved
    /// by more than `max_drift` relative to the stored value.
    pub fn compare(&self, current: &Baseline, max_drift: f64) -> Vec<Drift> {
        self.min_slack
            .iter()
            .filter_map(|(key, &stored)| {
                let now = current.min_slack.get(key).copied();
                let relative = match now {
                    Some(v) => (v - stored).abs() / stored.abs().max(f64::MIN_POSITIVE),
                    None => f64::INFINITY,
                };
                (relative >= max_drift).then(|| Drift {
                    key: key.clone(),
                    stored,
                    current: now,
                    relative,
                })
            })
            .collect()
    }
}

/// Compares against the baseline at `path`, writing it first if absent.
/// Returns the drifted entries (empty on first write).
pub fn check_or_write(path: &Path, records: &[VerificationRecord], max_drift: f64) -> Result<Vec<Drift>> {
    let current = Baseline::from_records(records);
    if path.exists() {
        Ok(Baseline::load(path)?.compare(&current, max_drift))
    } else {
        current.save(path)?;
        Ok(Vec::new())
    }
}
