use serde::{Deserialize, Serialize};

use crate::dists::SxModel;
use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// A parallel network of `n` queues with Poisson arrivals at total rate `lambda * n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Per-queue arrival intensity; the network receives `lambda * n` jobs per unit time.
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// Dispatch probabilities on arrival.
    pub p0: Vec<f64>,
    /// Re-routing probabilities after a timeout (independent of the source queue).
    pub p1: Vec<f64>,
    pub tau: Vec<f64>,
    pub model: SxModel,
}

fn check_stochastic(name: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{name} has length {}, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidConfig(format!(
            "{name} has entries outside [0, 1]"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidConfig(format!(
            "{name} sums to {total}, not 1"
        )));
    }
    Ok(())
}

impl NetworkConfig {
    /// Unit rates, uniform routing and a common timeout.
    pub fn symmetric(n: usize, lambda: f64, tau: f64, model: SxModel) -> Self {
        let uniform = vec![1.0 / n as f64; n];
        NetworkConfig {
            n,
            lambda,
            mu: vec![1.0; n],
            p0: uniform.clone(),
            p1: uniform,
            tau: vec![tau; n],
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("need at least one queue".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        check_stochastic("p0", &self.p0, self.n)?;
        check_stochastic("p1", &self.p1, self.n)?;
        if self.mu.len() != self.n || self.tau.len() != self.n {
            return Err(Error::InvalidConfig("mu and tau must have length N".into()));
        }
        if self.mu.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(Error::InvalidConfig(
                "service rates must be positive".into(),
            ));
        }
        if self.tau.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidConfig(
                "timeouts must be positive (use inf to disable)".into(),
            ));
        }
        self.model
            .validate()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    /// Whether every queue completes some first visits before its timeout.
    pub fn completion_possible(&self) -> bool {
        self.mu
            .iter()
            .zip(&self.tau)
            .all(|(m, t)| self.model.eta1_ccdf(m * t) < 1.0)
    }

    /// Unit rates, uniform routing and equal timeouts.
    pub fn is_symmetric(&self) -> bool {
        let u = 1.0 / self.n as f64;
        let close = |a: f64, b: f64| (a - b).abs() <= STOCHASTIC_TOL;
        self.mu.iter().all(|&m| m == 1.0)
            && self.p0.iter().all(|&p| close(p, u))
            && self.p1.iter().all(|&p| close(p, u))
            && self.tau.iter().all(|&t| t == self.tau[0])
    }
}
