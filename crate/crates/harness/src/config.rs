//! Experiment configuration, read from a single JSON document.

use std::fmt;
use std::path::Path;

use clusterlab_core::distributions::ErrorModel;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::HarnessError;

/// Degrees of freedom of the Student t disturbances; `Infinite` means Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Df {
    Finite(f64),
    Infinite,
}

impl Df {
    /// Disturbance law with unit scale.
    pub fn error_model(self) -> clusterlab_core::Result<ErrorModel> {
        match self {
            Df::Finite(df) => ErrorModel::student_t(df, 1.0),
            Df::Infinite => ErrorModel::gaussian(1.0),
        }
    }

    /// Position on a numeric axis; `Infinite` maps to `+∞`.
    pub fn value(self) -> f64 {
        match self {
            Df::Finite(v) => v,
            Df::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Df {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Df::Finite(v) => write!(f, "{v}"),
            Df::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Df {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Df::Finite(v) => s.serialize_f64(*v),
            Df::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Df {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() && v > 0.0 => Ok(Df::Finite(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("df must be positive, got {v}"))),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl std::str::FromStr for Df {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Df::Infinite),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => Ok(Df::Finite(v)),
                Ok(v) if v == f64::INFINITY => Ok(Df::Infinite),
                _ => Err(format!("df must be a positive number or \"inf\", got {s:?}")),
            },
        }
    }
}

/// Null model for the test statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelKind {
    /// Statistics are the moving-average values themselves.
    Model1,
    /// Statistics are row t-statistics over `n` independent moving-average columns.
    Model2 { n: usize },
}

impl ModelKind {
    pub fn id(&self) -> String {
        match self {
            ModelKind::Model1 => "model1".into(),
            ModelKind::Model2 { n } => format!("model2-n{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationChoice {
    /// Closed form when one exists, Monte Carlo otherwise.
    #[default]
    Auto,
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub method: CalibrationChoice,
    /// Draws per Monte Carlo quantile.
    pub budget: u64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            method: CalibrationChoice::Auto,
            budget: 200_000_000,
        }
    }
}

/// Grid of simulation cells `(ν, r, df)` for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub model: ModelKind,
    pub nu: Vec<usize>,
    pub r: Vec<usize>,
    pub df: Vec<Df>,
    pub alpha: f64,
    pub repetitions: u64,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    pub master_seed: u64,
    /// Worker threads; results do not depend on it.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Explicit nonzero weights at offsets `0..len`, replacing the equal
    /// weights. The `r` list must then be `[len]`.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// Default tail-weight grid.
pub const DEFAULT_DF: [Df; 6] = [
    Df::Finite(3.0),
    Df::Finite(4.0),
    Df::Finite(6.0),
    Df::Finite(10.0),
    Df::Finite(20.0),
    Df::Infinite,
];

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let spec: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        if self.r.contains(&0) {
            return bad("r values must be >= 1".into());
        }
        if self.nu.contains(&0) {
            return bad("nu values must be >= 1".into());
        }
        if let ModelKind::Model2 { n } = self.model {
            if n < 2 {
                return bad(format!("model2 needs n >= 2, got {n}"));
            }
        }
        if self.calibration.budget == 0 {
            return bad("calibration budget must be >= 1".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if let Some(w) = &self.weights {
            if w.is_empty() || w.iter().any(|v| !v.is_finite()) || w.iter().all(|&v| v == 0.0) {
                return bad("weights must be finite with at least one nonzero value".into());
            }
            if !(self.r.is_empty() || self.r == [w.len()]) {
                return bad(format!("with explicit weights the r list must be [{}]", w.len()));
            }
        }
        Ok(())
    }

    /// `r` values actually run.
    pub fn radii(&self) -> Vec<usize> {
        match &self.weights {
            Some(w) => vec![w.len()],
            None => self.r.clone(),
        }
    }
}
