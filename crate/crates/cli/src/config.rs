//! Experiment configuration: a TOML file with optional sections, every field defaulted.

use std::collections::BTreeMap;
use std::path::Path;

use mrlab_core::geometry::BoundaryPreset;
use mrlab_core::ParamSet;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<Vec<usize>>,
    pub half_width: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilyConfig {
    pub count: Option<usize>,
    pub seed: Option<u64>,
    /// Band limit of random band-limited members.
    pub kmax: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub preset: Option<BoundaryPreset>,
    pub eps: Option<f64>,
    pub charts: Option<usize>,
    pub overlap: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatConfig {
    /// `manufactured-1`, `manufactured-line` or `random`.
    pub case: Option<String>,
    pub n1: Option<usize>,
    pub n2: Option<usize>,
    pub nt: Option<usize>,
    pub depth: Option<f64>,
    pub l2: Option<f64>,
    pub horizon: Option<f64>,
    pub grading: Option<f64>,
    pub ext_levels: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: ParamSet,
    /// Theorems checked by `validate`: `intro`, `halfspace`, `domain`, `heat`.
    pub theorems: Option<Vec<String>>,
    /// Top trace order for trace, extension and boundary checks.
    pub m: Option<usize>,
    pub grid: GridConfig,
    pub family: FamilyConfig,
    pub domain: DomainConfig,
    pub heat: HeatConfig,
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::parse(&text).map_err(|msg| CliError::Config(format!("{}: {msg}", path.display())))
    }

    pub fn parse(text: &str) -> Result<ExperimentConfig, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}
