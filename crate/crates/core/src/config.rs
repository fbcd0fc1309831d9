//! Experiment configuration: one TOML file with a section per command.
//!
//! ```toml
//! seed = 7
//! tie_break = "by_index"
//!
//! [discount]
//! family = "log"
//!
//! [world]
//! grades = [1.0, 0.0]
//! curves = [{ family = "affine", intercept = 0.0, slope = 1.0 }]
//!
//! [[scorers]]
//! name = "canonical"
//! kind = "canonical"
//!
//! [curve]
//! n_grid = [100, 1000, 10000]
//! trials = 50
//! ```
//!
//! A run manifest (`manifest.json`) embeds the resolved config and can be
//! passed back in place of the TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{ClickThresholds, DistributionSpec};
use crate::discount::Discount;
use crate::error::{Error, Result};
use crate::experiments::{GeometricGrid, Measure, NamedScorer, NonconvergenceThresholds};
use crate::metrics::TieBreak;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; 0 when absent.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tie_break: TieBreak,
    #[serde(default = "Discount::log")]
    pub discount: Discount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<DistributionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scorers: Vec<NamedScorer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinguish: Option<DistinguishConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonconverge: Option<NonconvergeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ingest: Option<IngestConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistinguishConfig {
    #[serde(flatten)]
    pub grid: GeometricGrid,
    pub trials: usize,
    /// Scorer names `[f0, f1]`; the first two scorers when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[String; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonconvergeConfig {
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(flatten)]
    pub thresholds: NonconvergenceThresholds,
    /// Scorer name; the first scorer when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    /// Scorer name; the first scorer (or the canonical scorer when none are
    /// listed) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scorer: Option<String>,
    /// Sample size for calibrating scorers that do not preserve the
    /// canonical order.
    #[serde(default = "default_calibration_n")]
    pub calibration_n: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_calibration_n() -> usize {
    1_000_000
}

fn default_bins() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestConfig {
    /// Click-log CSV; relative paths resolve against the config file and are
    /// stored absolute.
    pub path: PathBuf,
    #[serde(default)]
    pub thresholds: ClickThresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_columns: Option<Vec<String>>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a TOML config, or the `config` entry of a JSON run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let inner = manifest.get("config").ok_or_else(|| {
                Error::Config(format!(
                    "{}: manifest has no 'config' entry",
                    path.display()
                ))
            })?;
            serde_json::from_value(inner.clone())
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            RunConfig::from_toml_str(&text).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                other => other,
            })?
        };
        if let Some(ingest) = &mut cfg.ingest {
            if ingest.path.is_relative() {
                if let Some(dir) = path.parent() {
                    ingest.path = dir.join(&ingest.path);
                }
                if let Ok(abs) = std::fs::canonicalize(&ingest.path) {
                    ingest.path = abs;
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn measure(&self) -> Measure {
        Measure {
            discount: self.discount.clone(),
            tie_break: self.tie_break,
        }
    }

    pub fn world(&self) -> Result<&DistributionSpec> {
        self.world
            .as_ref()
            .ok_or_else(|| Error::Config("missing [world] section".into()))
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| Error::Config(format!("missing [{name}] section")))
    }

    pub fn scorer(&self, name: &str) -> Result<&NamedScorer> {
        self.scorers
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| Error::Config(format!("no scorer named '{name}'")))
    }

    /// Rejects duplicate scorer names.
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.scorers.iter().enumerate() {
            if self.scorers[..i].iter().any(|t| t.name == s.name) {
                return Err(Error::Config(format!("duplicate scorer name '{}'", s.name)));
            }
            s.spec.validate()?;
        }
        Ok(())
    }
}
