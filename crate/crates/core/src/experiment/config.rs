//! Flat `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mesh::{MeshError, QcMesh};
use crate::potential::{LennardJones, PairPotential};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{0}` given twice")]
    Duplicate(String),
    #[error("bad value `{value}` for `{key}`: {msg}")]
    Value { key: String, value: String, msg: String },
    #[error("chain sizes rejected: {0}")]
    Mesh(#[from] MeshError),
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    LennardJones,
}

impl PotentialKind {
    pub fn build(self) -> Box<dyn PairPotential> {
        match self {
            Self::LennardJones => Box::new(LennardJones),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LennardJones => "lennard-jones",
        }
    }
}

impl FromStr for PotentialKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lennard-jones" | "lj" => Ok(Self::LennardJones),
            _ => Err("expected lennard-jones".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Uniform,
    Endpoint,
    SingleStep,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Endpoint => "endpoint",
            Self::SingleStep => "single-step",
        }
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "endpoint" => Ok(Self::Endpoint),
            "single-step" => Ok(Self::SingleStep),
            _ => Err("expected uniform, endpoint or single-step".into()),
        }
    }
}

/// Defaults reproduce the fracture and continuation experiment on the
/// uncoarsened 15-atom chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub potential: PotentialKind,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    /// Full load `Φ(1)`.
    pub scale: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma0: f64,
    pub planner: PlannerKind,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            potential: PotentialKind::LennardJones,
            m: 7,
            n: 7,
            k: 3,
            scale: 2.76,
            alpha: 8.0 / 9.0,
            epsilon: 1e-6,
            gamma0: 0.0,
            planner: PlannerKind::Endpoint,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

pub const KEYS: [&str; 11] = ["potential", "M", "N", "K", "scale", "alpha", "epsilon", "gamma0", "planner", "out", "seed"];

/// Accepts `a/b` as well as plain decimals.
fn parse_real(v: &str) -> Result<f64, String> {
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
            let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
            a / b
        }
        None => v.parse().map_err(|e| format!("{e}"))?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err("not a finite number".into())
    }
}

impl ExperimentConfig {
    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |msg: String| ConfigError::Value { key: key.into(), value: value.into(), msg };
        let count = |v: &str| v.parse::<usize>().map_err(|e| bad(e.to_string()));
        match key {
            "potential" => self.potential = value.parse().map_err(bad)?,
            "M" => self.m = count(value)?,
            "N" => self.n = count(value)?,
            "K" => self.k = count(value)?,
            "scale" => self.scale = parse_real(value).map_err(bad)?,
            "alpha" => self.alpha = parse_real(value).map_err(bad)?,
            "epsilon" => self.epsilon = parse_real(value).map_err(bad)?,
            "gamma0" => self.gamma0 = parse_real(value).map_err(bad)?,
            "planner" => self.planner = value.parse().map_err(bad)?,
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, msg: "expected key = value".into() })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(ConfigError::Duplicate(key.into()));
            }
            seen.push(key);
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.to_path_buf(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_text())` gives back the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "potential = {}", self.potential.name());
        let _ = writeln!(s, "M = {}", self.m);
        let _ = writeln!(s, "N = {}", self.n);
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "scale = {:?}", self.scale);
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "gamma0 = {:?}", self.gamma0);
        let _ = writeln!(s, "planner = {}", self.planner.name());
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// First 16 hex digits of the SHA-256 of [`to_text`](Self::to_text),
    /// with the output directory left out.
    pub fn hash(&self) -> String {
        let text: String = self.to_text().lines().filter(|l| !l.starts_with("out ")).map(|l| format!("{l}\n")).collect();
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn mesh(&self, a0: f64) -> Result<QcMesh, ConfigError> {
        Ok(QcMesh::symmetric(self.m, self.n, self.k, a0)?)
    }

    /// Checks the chain sizes and the ranges of the real parameters.
    pub fn validate(&self) -> Result<(), ConfigError> {
        QcMesh::symmetric(self.m, self.n, self.k, 1.0)?;
        let range = |key: &str, v: f64, ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Value { key: key.into(), value: format!("{v:?}"), msg: msg.into() })
            }
        };
        range("scale", self.scale, self.scale > 0.0, "must be positive")?;
        range("alpha", self.alpha, self.alpha > 0.0 && self.alpha < 1.0, "must lie in (0, 1)")?;
        range("epsilon", self.epsilon, self.epsilon > 0.0, "must be positive")?;
        range("gamma0", self.gamma0, self.gamma0 >= 0.0, "must be nonnegative")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_survive_the_text_form() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn comments_fractions_and_overrides() {
        let c = ExperimentConfig::parse("# chain\nM = 20 # wider\n alpha=1/2\nplanner = uniform\n").unwrap();
        assert_eq!(c.m, 20);
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.planner, PlannerKind::Uniform);
        assert_eq!(c.n, 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(ExperimentConfig::parse("M 7"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("size = 7"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(ExperimentConfig::parse("M = 7\nM = 8"), Err(ConfigError::Duplicate(_))));
        assert!(matches!(ExperimentConfig::parse("alpha = 1.5"), Err(ConfigError::Value { .. })));
        assert!(matches!(ExperimentConfig::parse("N = 3\nK = 5"), Err(ConfigError::Mesh(_))));
        assert!(matches!(ExperimentConfig::parse("potential = morse"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn hash_ignores_output_directory() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.scale = 2.5;
        assert_ne!(a.hash(), b.hash());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_lossless(
            n in 1usize..30,
            extra in 0usize..20,
            kf in 0.0f64..1.0,
            scale in 1e-3f64..2.7,
            alpha in 1e-3f64..0.999,
            eps in 1e-12f64..1e-1,
            seed in any::<u64>(),
        ) {
            let k = ((n + 1) as f64 * kf) as usize;
            let c = ExperimentConfig {
                m: n + extra,
                n,
                k,
                scale,
                alpha,
                epsilon: eps,
                seed,
                ..ExperimentConfig::default()
            };
            prop_assume!(c.validate().is_ok());
            prop_assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
