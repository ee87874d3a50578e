//! Resolved run configuration. Defaults are overridden by a JSON config
//! file (or a previous run manifest), which is overridden by flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lssfind::evaluation::EvalSettings;
use lssfind::explain::ExplainConfig;
use lssfind::ForestParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explain: Option<ExplainCmdConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evaluate: Option<EvaluateConfig>,
}

impl ConfigFile {
    /// Reads a config file. A run manifest is accepted as well; its
    /// resolved `config` section is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let mut value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("config {} is not valid JSON: {e}", path.display())))?;
        if value.get("subcommand").is_some() {
            value = value.get("config").cloned().unwrap_or_default();
        }
        serde_json::from_value(value).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub data: Option<PathBuf>,
    pub label: String,
    /// Relative to the output directory.
    pub output: PathBuf,
    pub forest: ForestParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            data: None,
            label: "y".into(),
            output: "forest.json".into(),
            forest: ForestParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Interaction selection plus the top of the PII ranking.
    #[default]
    Interactions,
    /// Signed feature selection.
    Features,
    /// Full PII and PFI score tables, no selection.
    ScoresOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainCmdConfig {
    pub forest: Option<PathBuf>,
    /// One inline test point.
    pub point: Option<Vec<f64>>,
    /// CSV of test points; columns are matched to the forest's feature
    /// names, or taken in order when the names do not match.
    pub points: Option<PathBuf>,
    pub mode: Mode,
    pub top_k: usize,
    pub thresholds: ExplainConfig,
}

impl Default for ExplainCmdConfig {
    fn default() -> Self {
        ExplainCmdConfig {
            forest: None,
            point: None,
            points: None,
            mode: Mode::default(),
            top_k: 10,
            thresholds: ExplainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub j: usize,
    pub l: usize,
    pub snr: f64,
    pub n: usize,
    pub p: usize,
    /// Model spec JSON used instead of the benchmark `(j, l, snr, p)`.
    pub spec: Option<PathBuf>,
    pub data_output: PathBuf,
    pub truth_output: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            j: 1,
            l: 2,
            snr: 1.0,
            n: 1000,
            p: lssfind::sim::BENCHMARK_P,
            spec: None,
            data_output: "data.csv".into(),
            truth_output: "truth.json".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl Scale {
    pub fn settings(self) -> EvalSettings {
        match self {
            Scale::Desk => EvalSettings::desk(),
            Scale::Full => EvalSettings::full(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Grid JSON: a list of cells, `{"cells": [...]}`, or grid axes. The
    /// published grid is used when absent.
    pub grid: Option<PathBuf>,
    pub scale: Scale,
    /// Overrides the scale defaults when present.
    pub settings: Option<EvalSettings>,
    pub output: PathBuf,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            grid: None,
            scale: Scale::default(),
            settings: None,
            output: "results.csv".into(),
        }
    }
}
