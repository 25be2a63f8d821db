use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analytic::{optimal_timeout, NetworkConfig};
use crate::dists::{DistributionSpec, SxModel};
use crate::error::{Error, Result};
use crate::sim::{Discipline, Scheme};

/// A fixed timeout or the load-optimal one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TauChoice {
    #[default]
    Auto,
    Fixed(f64),
}

impl TauChoice {
    pub fn resolve(self, model: &SxModel) -> Result<f64> {
        match self {
            TauChoice::Fixed(t) if t > 0.0 => Ok(t),
            TauChoice::Fixed(t) => Err(Error::InvalidConfig(format!(
                "timeout must be positive, got {t}"
            ))),
            TauChoice::Auto => Ok(optimal_timeout(model, None)?.tau_star),
        }
    }
}

impl std::str::FromStr for TauChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(TauChoice::Auto),
            "inf" | "infinity" => Ok(TauChoice::Fixed(f64::INFINITY)),
            v => v.parse().map(TauChoice::Fixed).map_err(|_| {
                Error::Parse(format!("timeout must be a number, inf or auto, got {s:?}"))
            }),
        }
    }
}

impl Serialize for TauChoice {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TauChoice::Auto => s.serialize_str("auto"),
            TauChoice::Fixed(t) => s.serialize_f64(*t),
        }
    }
}

impl<'de> Deserialize<'de> for TauChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(TauChoice::Fixed(t)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn default_n() -> usize {
    50
}
fn default_jobs() -> usize {
    100_000
}
fn default_reps() -> usize {
    10
}

/// One sweep or response-time experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub model: SxModel,
    #[serde(default)]
    pub schemes: Vec<Scheme>,
    /// Offered loads `λE[η₁]`.
    pub lambda_grid: Vec<f64>,
    #[serde(default)]
    pub tau: TauChoice,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default = "default_jobs")]
    pub n_jobs: usize,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub discipline: Discipline,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.model
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        if self
            .lambda_grid
            .iter()
            .any(|l| !(*l > 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "lambda_grid entries must be positive".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig(
                "replications must be at least 1".into(),
            ));
        }
        if self.n == 0 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        for s in &self.schemes {
            s.validate(self.n)?;
        }
        Ok(())
    }

    /// Symmetric network at offered load `load = λE[η₁]`.
    pub fn network(&self, load: f64, tau: f64) -> NetworkConfig {
        NetworkConfig::symmetric(
            self.n,
            load / self.model.eta1_mean(),
            tau,
            self.model.clone(),
        )
    }
}

pub fn parse_json5<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    json5::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_json5<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_json5(&text)
}

/// Parses an S&X model, or a bare slowdown law taken with unit size.
pub fn parse_model(text: &str) -> Result<SxModel> {
    let model = match parse_json5::<SxModel>(text) {
        Ok(m) => m,
        Err(first) => match parse_json5::<DistributionSpec>(text) {
            Ok(s) => SxModel::unit_size(s),
            Err(_) => return Err(first),
        },
    };
    model
        .validate()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok(model)
}

pub fn read_model(path: &Path) -> Result<SxModel> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_slowdown_and_full_model() {
        let m = parse_model(r#"{kind: "bimodal", s_m: 10, s_M: 1000, p: 0.99}"#).unwrap();
        assert!((m.eta1_mean() - 19.9).abs() < 1e-12);
        let m = parse_model(
            r#"{S: {kind: "pareto", alpha: 1.5, s_m: 1}, X: {kind: "uniform", a: 0, b: 2}, mode: "resume"}"#,
        )
        .unwrap();
        assert!((m.eta1_mean() - 3.0).abs() < 1e-12);
        assert!(matches!(
            parse_model("{kind: 'nope'}"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            parse_model("{kind: 'exponential', rate: -1}"),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn experiment_defaults() {
        let spec: ExperimentSpec = parse_json5(
            r#"{
                model: {S: {kind: "bimodal", s_m: 10, s_M: 1000, p: 0.99}, X: {kind: "deterministic", v: 1}, mode: "restart"},
                schemes: ["slb", "coc-2"],
                lambda_grid: [0.1, 1.2],
                tau: "auto",
            }"#,
        )
        .unwrap();
        assert_eq!(spec.n, 50);
        assert_eq!(spec.replications, 10);
        assert_eq!(spec.schemes, [Scheme::Slb, Scheme::CoC(2)]);
        assert_eq!(spec.tau.resolve(&spec.model).unwrap(), 10.0);
        spec.validate().unwrap();
    }
}
