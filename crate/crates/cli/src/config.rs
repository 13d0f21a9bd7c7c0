use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vbll_core::calibration::{DEFAULT_ECE_BINS, DEFAULT_HISTOGRAM_BINS};
use vbll_core::dataset::DEFAULT_K_NEIGHBORS;
use vbll_core::inference::DEFAULT_MC_SAMPLES;
use vbll_core::selection::default_grid;
use vbll_core::{LayerInit, Measure, SplitRatios, SyntheticConfig, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BalanceConfig {
    /// Per-class targets; defaults to the largest class count for every class.
    pub target_counts: Option<Vec<usize>>,
    pub k_neighbors: usize,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        Self {
            target_counts: None,
            k_neighbors: DEFAULT_K_NEIGHBORS,
        }
    }
}

/// Everything a run can be configured with. Command-line flags override
/// values read from `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub synthetic: SyntheticConfig,
    pub split: SplitRatios,
    pub balance: BalanceConfig,
    pub init: LayerInit,
    pub train: TrainConfig,
    pub mc_samples: usize,
    pub threshold: f64,
    pub measure: Measure,
    pub grid: Vec<f64>,
    pub ece_bins: usize,
    pub histogram_bins: usize,
    pub ece_accepted_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            synthetic: SyntheticConfig::default(),
            split: SplitRatios::default(),
            balance: BalanceConfig::default(),
            init: LayerInit::default(),
            train: TrainConfig::default(),
            mc_samples: DEFAULT_MC_SAMPLES,
            threshold: 0.7,
            measure: Measure::Confidence,
            grid: default_grid(),
            ece_bins: DEFAULT_ECE_BINS,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            ece_accepted_only: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"seed": 4, "train": {"epochs": 2}, "synthetic": {"feature_dim": 3}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.train.epochs, 2);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.synthetic.feature_dim, 3);
        assert_eq!(cfg.grid.len(), 9);
    }

    #[test]
    fn unknown_keys_rejected_at_every_level() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sed": 4}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"train": {"epoch": 4}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"balance": {"k": 4}}"#).is_err());
    }
}
