//! Outcome of one inequality check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Slack-ratio floor for the denominator.
pub const SLACK_EPS: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    /// Failed with the estimated constant but passed once it was inflated:
    /// the estimator, not the inequality, fell short.
    EstimatorShortfall,
    Violation,
    NumericalFailure,
}

impl CheckStatus {
    pub fn is_genuine_failure(self) -> bool {
        matches!(self, CheckStatus::Violation)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRecord {
    pub check: String,
    pub model: String,
    pub seed: u64,
    pub trial: u64,
    /// Exponent `p` when the check uses one.
    #[serde(with = "opt_float")]
    pub p: Option<f64>,
    #[serde(with = "float")]
    pub lhs: f64,
    #[serde(with = "float")]
    pub rhs: f64,
    #[serde(with = "float")]
    pub slack_ratio: f64,
    #[serde(with = "float")]
    pub tol: f64,
    pub pass: bool,
    pub status: CheckStatus,
    #[serde(with = "float")]
    pub cstar: f64,
    pub cstar_provenance: String,
    /// Hex digest of the inputs that determine the check.
    pub inputs_digest: String,
    #[serde(with = "float")]
    pub wall_time_ms: f64,
    /// Intermediate quantities (norms, sub-bounds, constants).
    #[serde(with = "float_map")]
    pub details: BTreeMap<String, f64>,
}

/// `rhs / lhs`, infinite when the left side is nonpositive.
pub fn slack_ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 0.0 {
        if rhs >= lhs {
            f64::INFINITY
        } else {
            rhs / lhs.abs().max(SLACK_EPS)
        }
    } else {
        rhs / lhs.max(SLACK_EPS)
    }
}

impl VerificationRecord {
    /// Record for `lhs ≤ rhs` with additive tolerance `tol`.
    pub fn inequality(check: &str, model: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let pass = lhs <= rhs + tol;
        let numeric_ok = lhs.is_finite() && !rhs.is_nan();
        VerificationRecord {
            check: check.to_string(),
            model: model.to_string(),
            seed: 0,
            trial: 0,
            p: None,
            lhs,
            rhs,
            slack_ratio: slack_ratio(lhs, rhs),
            tol,
            pass: pass && numeric_ok,
            status: if !numeric_ok {
                CheckStatus::NumericalFailure
            } else if pass {
                CheckStatus::Pass
            } else {
                CheckStatus::Violation
            },
            cstar: f64::NAN,
            cstar_provenance: String::new(),
            inputs_digest: String::new(),
            wall_time_ms: 0.0,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_cstar(mut self, cstar: f64, provenance: &str) -> Self {
        self.cstar = cstar;
        self.cstar_provenance = provenance.to_string();
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_seed(mut self, seed: u64, trial: u64) -> Self {
        self.seed = seed;
        self.trial = trial;
        self
    }

    pub fn with_digest(mut self, digest: String) -> Self {
        self.inputs_digest = digest;
        self
    }

    /// Copy with the wall-time field zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_ms = 0.0;
        r
    }
}

/// JSON cannot hold non-finite numbers; these are written as strings.
fn encode(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::Value::from(v)
    } else if v.is_nan() {
        serde_json::Value::from("nan")
    } else if v > 0.0 {
        serde_json::Value::from("inf")
    } else {
        serde_json::Value::from("-inf")
    }
}

fn decode<E: serde::de::Error>(v: &serde_json::Value) -> Result<f64, E> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().ok_or_else(|| E::custom("bad number")),
        serde_json::Value::String(s) => match s.as_str() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            "nan" => Ok(f64::NAN),
            other => Err(E::custom(format!("bad float string {other:?}"))),
        },
        _ => Err(E::custom("expected number or float string")),
    }
}

mod float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::encode(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        super::decode(&serde_json::Value::deserialize(d)?)
    }
}

mod opt_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(super::encode).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<serde_json::Value>::deserialize(d)? {
            None | Some(serde_json::Value::Null) => Ok(None),
            Some(v) => super::decode(&v).map(Some),
        }
    }
}

mod float_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        m.iter()
            .map(|(k, v)| (k.clone(), super::encode(*v)))
            .collect::<BTreeMap<_, _>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        BTreeMap::<String, serde_json::Value>::deserialize(d)?
            .into_iter()
            .map(|(k, v)| super::decode(&v).map(|f| (k, f)))
            .collect()
    }
}
