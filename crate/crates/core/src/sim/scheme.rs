use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dispatching policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Scheme {
    /// Speculative load balancing with the configuration's timeouts.
    Slb,
    /// Random dispatch by `p0`, no timeouts.
    Rnd,
    /// `d` copies on arrival; siblings cancelled on the first completion.
    CoC(usize),
    /// Cancel-on-start, run as least-left-workload among `d` picks.
    CoS(usize),
    /// Copies only to idle queues among `d` picks, else one copy.
    Riq(usize),
}

impl Scheme {
    pub fn d(&self) -> Option<usize> {
        match *self {
            Scheme::CoC(d) | Scheme::CoS(d) | Scheme::Riq(d) => Some(d),
            Scheme::Slb | Scheme::Rnd => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.d() {
            Some(d) if d == 0 || d > n => Err(Error::InvalidScheme(format!(
                "{self}: need 1 <= d <= N = {n}"
            ))),
            _ => Ok(()),
        }
    }

    /// Independent slowdowns drawn per job.
    pub(crate) fn slowdowns_needed(&self) -> usize {
        match *self {
            Scheme::Slb | Scheme::Rnd => 2,
            Scheme::CoC(d) | Scheme::Riq(d) => d.max(2),
            Scheme::CoS(_) => 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::Slb => f.write_str("slb"),
            Scheme::Rnd => f.write_str("rnd"),
            Scheme::CoC(d) => write!(f, "coc-{d}"),
            Scheme::CoS(d) => write!(f, "cos-{d}"),
            Scheme::Riq(d) => write!(f, "riq-{d}"),
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "slb" => return Ok(Scheme::Slb),
            "rnd" | "random" => return Ok(Scheme::Rnd),
            _ => {}
        }
        let (name, d) = lower
            .split_once('-')
            .ok_or_else(|| Error::InvalidScheme(format!("unknown scheme {s:?}")))?;
        let d: usize = d
            .parse()
            .map_err(|_| Error::InvalidScheme(format!("bad d in {s:?}")))?;
        match name {
            "coc" => Ok(Scheme::CoC(d)),
            "cos" | "llw" => Ok(Scheme::CoS(d)),
            "riq" => Ok(Scheme::Riq(d)),
            _ => Err(Error::InvalidScheme(format!("unknown scheme {s:?}"))),
        }
    }
}

impl TryFrom<String> for Scheme {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scheme> for String {
    fn from(s: Scheme) -> String {
        s.to_string()
    }
}

/// Order in which a queue serves waiting jobs. Priorities are non-preemptive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Discipline {
    #[default]
    Fcfs,
    PriorityFreshFirst,
    PriorityRetryFirst,
}
