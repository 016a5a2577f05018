//! Experiment configuration: a graph family swept over sizes, a rule for
//! the density `p`, the model under test and Monte Carlo settings.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Family, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PRule {
    /// The same `p` at every size.
    Constant { p: f64 },
    /// `p = c / n`.
    OverN { c: f64 },
    /// A fixed list, optionally with `c / n` appended.
    Set {
        values: Vec<f64>,
        #[serde(default)]
        over_n: Option<f64>,
    },
}

impl PRule {
    pub fn values(&self, n: usize) -> Result<Vec<f64>> {
        let nf = n as f64;
        let mut v = match self {
            PRule::Constant { p } => vec![*p],
            PRule::OverN { c } => vec![c / nf],
            PRule::Set { values, over_n } => {
                let mut v = values.clone();
                if let Some(c) = over_n {
                    let q = c / nf;
                    if !v.iter().any(|&x| (x - q).abs() < 1e-15) {
                        v.push(q);
                    }
                }
                v
            }
        };
        for &p in &v {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Parameter(format!("p rule gives p = {p} at n = {n}, outside (0,1)")));
            }
        }
        v.dedup();
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Cbsep,
    Fa1f,
    Gcbsep,
    Csep,
}

/// JSON keys: `family`, `sizes`, `p_rule`, `model`, `seeds`, `replicas`,
/// `out`, and optionally `snapshot` (fitted constants from a previous run).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `cycle`, `path`, `complete`, `hypercube` (size = dimension),
    /// `torus:<dim>` (size = side), `tree:<branching>` (size = depth),
    /// `regular:<degree>` (seeded by the first seed).
    pub family: String,
    pub sizes: Vec<usize>,
    pub p_rule: PRule,
    pub model: Model,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub snapshot: Option<BTreeMap<String, f64>>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_replicas() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Parameter("config lists no sizes".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parameter("config lists no seeds".into()));
        }
        for &s in &self.sizes {
            let fam = self.family_at(s)?;
            let n = fam.build()?.n();
            self.p_rule.values(n)?;
        }
        Ok(())
    }

    pub fn family_at(&self, size: usize) -> Result<Family> {
        family_at(&self.family, size, self.seeds[0])
    }

    pub fn graph_at(&self, size: usize) -> Result<Graph> {
        self.family_at(size)?.build()
    }
}

pub fn family_at(template: &str, size: usize, seed: u64) -> Result<Family> {
    let (name, arg) = template.split_once(':').unwrap_or((template, ""));
    let arg = || -> Result<usize> {
        arg.trim().parse().map_err(|_| Error::Parse(format!("family {template:?} needs an integer parameter")))
    };
    Ok(match name.trim() {
        "cycle" => Family::Cycle { n: size },
        "path" => Family::Path { n: size },
        "complete" => Family::Complete { n: size },
        "hypercube" => Family::Hypercube { dim: size },
        "torus" => Family::Torus { side: size, dim: arg()? },
        "tree" => Family::BaryTree { branching: arg()?, depth: size },
        "regular" => Family::RandomRegular { degree: arg()?, n: size, seed },
        other => return Err(Error::Parse(format!("unknown family {other:?}"))),
    })
}
