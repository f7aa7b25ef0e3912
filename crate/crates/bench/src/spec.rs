//! Sweep grids, read from `key = value, value` text.
//!
//! ```text
//! # comment
//! vertices = 30, 50, 100
//! densities = 0.1
//! parties = 3, 10
//! key_bits = 256
//! k = search          # or a list of k values
//! seeds = 10
//! base_seed = 1
//! max_iterations = 100000
//! solvers = tabucol, ppts
//! sideways_after = 2  # or none
//! ```

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use ppts::protocol::ProtocolConfig;
use ppts::{Error, Result};

use crate::Solver;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(Vec<u32>),
    /// Chromatic search from the greedy bound down.
    Search,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub vertices: Vec<usize>,
    pub densities: Vec<f64>,
    pub parties: Vec<usize>,
    pub key_bits: Vec<u32>,
    pub k: KChoice,
    pub seeds: u64,
    pub base_seed: u64,
    pub max_iterations: u64,
    pub solvers: Vec<Solver>,
    pub sideways_after: Option<u64>,
}

impl Default for ExperimentSpec {
    /// The full experiment grid. Several days of compute at the top end.
    fn default() -> Self {
        ExperimentSpec {
            vertices: vec![100, 200, 300, 500, 1000],
            densities: vec![0.02, 0.05, 0.1, 0.2, 0.3],
            parties: vec![10],
            key_bits: vec![512, 1024],
            k: KChoice::Search,
            seeds: 10,
            base_seed: 1,
            max_iterations: 100_000,
            solvers: vec![Solver::Tabucol, Solver::Ppts],
            sideways_after: ProtocolConfig::new(1, 0).sideways_after,
        }
    }
}

impl ExperimentSpec {
    /// Sizes that finish on a laptop.
    pub fn desk() -> Self {
        ExperimentSpec {
            vertices: vec![30, 50, 100],
            densities: vec![0.1],
            parties: vec![3, 10],
            key_bits: vec![256],
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(Self::default()),
            "desk" => Ok(Self::desk()),
            other => Err(Error::Parameter(format!("unknown preset {other:?}"))),
        }
    }

    /// Keys not mentioned keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "vertices" => spec.vertices = list(value).map_err(err)?,
                "densities" => spec.densities = list(value).map_err(err)?,
                "parties" => spec.parties = list(value).map_err(err)?,
                "key_bits" => spec.key_bits = list(value).map_err(err)?,
                "k" if value == "search" => spec.k = KChoice::Search,
                "k" => spec.k = KChoice::Fixed(list(value).map_err(err)?),
                "seeds" => spec.seeds = one(value).map_err(err)?,
                "base_seed" => spec.base_seed = one(value).map_err(err)?,
                "max_iterations" => spec.max_iterations = one(value).map_err(err)?,
                "sideways_after" if value == "none" => spec.sideways_after = None,
                "sideways_after" => spec.sideways_after = Some(one(value).map_err(err)?),
                "solvers" => {
                    spec.solvers = value
                        .split(',')
                        .map(|s| match s.trim() {
                            "tabucol" => Ok(Solver::Tabucol),
                            "ppts" => Ok(Solver::Ppts),
                            other => Err(err(format!("unknown solver {other:?}"))),
                        })
                        .collect::<Result<_>>()?
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Parameter(format!("{what} must be nonempty and positive")));
        if self.vertices.is_empty() || self.vertices.contains(&0) {
            return bad("vertices");
        }
        if self.densities.is_empty() || self.densities.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::Parameter("densities must lie in (0, 1]".into()));
        }
        if self.parties.is_empty() || self.parties.contains(&0) {
            return bad("parties");
        }
        if self.key_bits.is_empty() || self.key_bits.contains(&0) {
            return bad("key_bits");
        }
        if let KChoice::Fixed(ks) = &self.k {
            if ks.is_empty() || ks.contains(&0) {
                return bad("k");
            }
        }
        if self.seeds == 0 || self.max_iterations == 0 || self.solvers.is_empty() {
            return bad("seeds, max_iterations and solvers");
        }
        Ok(())
    }
}

fn one<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse {s:?}"))
}

fn list<T: FromStr>(s: &str) -> Result<Vec<T>, String> {
    s.split(',').map(one).collect()
}
