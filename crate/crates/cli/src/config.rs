//! Run configuration: flat key-value config files with `[section]` headers,
//! merged under explicit command-line flags.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use dunkl_core::poly::{parse_rational, Rat};
use dunkl_core::reflection::{Family, Multiplicity, RootSystem};
use dunkl_core::OperatorContext;
use std::sync::Arc;

/// Parsed `[section] key = value` file; keys are stored as
/// `"section.key"`.
#[derive(Debug, Default)]
pub struct KeyValueFile {
    entries: BTreeMap<String, String>,
}

impl KeyValueFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| anyhow!("line {}: unterminated section", lineno + 1))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let full = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{section}.{}", key.trim())
            };
            entries.insert(full, value.trim().to_string());
        }
        Ok(KeyValueFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }
}

/// Resolved group descriptor.
#[derive(Clone, Debug, Serialize)]
pub struct GroupSpec {
    pub family: String,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub kappa: Vec<String>,
}

impl GroupSpec {
    pub fn resolve(
        family: Option<String>,
        dim: Option<usize>,
        order: Option<usize>,
        kappa: Option<String>,
        file: Option<&KeyValueFile>,
    ) -> Result<Self> {
        let fetch = |key: &str| file.and_then(|f| f.get(key)).map(str::to_string);
        let family = family
            .or_else(|| fetch("group.family"))
            .unwrap_or_else(|| "trivial".into())
            .to_lowercase();
        let dim = match dim {
            Some(d) => d,
            None => fetch("group.dim")
                .map(|s| s.parse::<usize>().context("group.dim"))
                .transpose()?
                .unwrap_or(3),
        };
        let order = match order {
            Some(m) => Some(m),
            None => fetch("group.m")
                .map(|s| s.parse::<usize>().context("group.m"))
                .transpose()?,
        };
        let kappa_str = kappa.or_else(|| fetch("group.kappa")).unwrap_or_default();
        let kappa: Vec<String> = kappa_str
            .split([',', ' '])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        Ok(GroupSpec {
            family,
            dim,
            order,
            kappa,
        })
    }

    pub fn kappa_values(&self) -> Result<Vec<Rat>> {
        self.kappa
            .iter()
            .map(|s| parse_rational(s).map_err(|e| anyhow!("kappa value `{s}`: {e}")))
            .collect()
    }

    /// Builds the operator context; all validation errors surface here.
    pub fn build(&self) -> Result<Arc<OperatorContext>> {
        let family = match self.family.as_str() {
            "trivial" => Family::Trivial,
            "z2" => Family::Z2,
            "a" => Family::A,
            "b" => Family::B,
            "i2" => Family::Dihedral(self.order.ok_or_else(|| anyhow!("i2 needs --m"))?),
            other => bail!("unknown group family `{other}` (expected trivial|z2|a|b|i2)"),
        };
        let rs = RootSystem::build(family, self.dim, self.order)?;
        let kappa_vals = self.kappa_values()?;
        let mult = if kappa_vals.is_empty() {
            Multiplicity::zero(&rs)
        } else {
            Multiplicity::from_orbit_values(&rs, &kappa_vals)?
        };
        Ok(Arc::new(OperatorContext::new(rs, mult)?))
    }
}

/// Common run options after merging flags with an optional config file.
#[derive(Clone, Debug, Serialize)]
pub struct RunSpec {
    pub degree: usize,
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
}

impl RunSpec {
    pub fn resolve(
        degree: Option<usize>,
        seed: Option<u64>,
        samples: Option<usize>,
        tolerance: Option<f64>,
        file: Option<&KeyValueFile>,
    ) -> Result<Self> {
        let fetch = |key: &str| file.and_then(|f| f.get(key)).map(str::to_string);
        let parse_num = |key: &str| -> Result<Option<f64>> {
            fetch(key)
                .map(|s| s.parse::<f64>().with_context(|| key.to_string()))
                .transpose()
        };
        let degree = match degree {
            Some(d) => d,
            None => parse_num("run.degree")?.map(|v| v as usize).unwrap_or(4),
        };
        let seed = match seed {
            Some(s) => s,
            None => parse_num("run.seed")?.map(|v| v as u64).unwrap_or(0),
        };
        let samples = match samples {
            Some(s) => s,
            None => parse_num("run.samples")?.map(|v| v as usize).unwrap_or(20),
        };
        let tolerance = match tolerance {
            Some(t) => t,
            None => parse_num("run.tol")?.unwrap_or(dunkl_core::tolerances::IDENTITY),
        };
        if tolerance <= 0.0 {
            bail!("tolerance must be positive");
        }
        Ok(RunSpec {
            degree,
            seed,
            samples,
            tolerance,
        })
    }
}
