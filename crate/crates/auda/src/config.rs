//! Run configuration: one TOML file covering feature extraction windows,
//! phase thresholds, model dimensions, optimizer settings, fold count, and
//! the synthetic generator.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CsvSchema, SynthConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::features::FeatureConfig;
use crate::model::{ModelConfig, TrainConfig};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
    pub csv: CsvSchema,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        self.train.validate()?;
        self.eval.validate()?;
        self.synth.validate()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.features.windows, vec![9, 27]);
        assert_eq!(cfg.eval.folds, 10);
        assert_eq!(cfg.model.hidden_dim, 64);
        assert!((cfg.train.learning_rate - 1e-3).abs() < 1e-15);

        let text = cfg.to_toml();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed.features.windows, cfg.features.windows);
        assert_eq!(parsed.train.batch_size, cfg.train.batch_size);
    }

    #[test]
    fn partial_files_fill_defaults_and_unknown_keys_fail() {
        let cfg: RunConfig = toml::from_str("[eval]\nfolds = 4\n").unwrap();
        assert_eq!(cfg.eval.folds, 4);
        assert_eq!(cfg.features.windows, vec![9, 27]);
        assert!(toml::from_str::<RunConfig>("[eval]\nfold_count = 4\n").is_err());
    }

    #[test]
    fn load_reports_missing_file_with_path() {
        let err = RunConfig::load(Path::new("/nonexistent/config.toml")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let cfg: RunConfig = toml::from_str("[features]\nwindows = [4]\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg: RunConfig = toml::from_str("[eval]\nmethods = [\"nope\"]\n").unwrap();
        assert!(cfg.validate().is_err());
    }
}
