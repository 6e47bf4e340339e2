use std::path::{Path, PathBuf};

use serde::Deserialize;

use lsgenre::features::{VectorizerKind, DEFAULT_MAX_FEATURES};
use lsgenre::models::{ModelKind, TrainConfig, DEFAULT_THRESHOLD};
use lsgenre::{Error, Result};

/// Settings shared by all subcommands. Command-line flags override the file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub vectorizer: VectorizerKind,
    pub model: ModelKind,
    pub threshold: f64,
    pub max_features: usize,
    pub fixtures: bool,
    pub paths: Paths,
    pub train: TrainConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Cleaning rules; the built-in set when absent.
    pub rules: Option<PathBuf>,
    pub registry: Option<PathBuf>,
    /// Directory of recorded HTTP responses used in fixture mode.
    pub fixture_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            vectorizer: VectorizerKind::Tfidf,
            model: ModelKind::Svc,
            threshold: DEFAULT_THRESHOLD,
            max_features: DEFAULT_MAX_FEATURES,
            fixtures: false,
            paths: Paths::default(),
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.max_features == 0 {
            return Err(Error::Config("max_features must be at least 1".into()));
        }
        if self.train.folds < 2 {
            return Err(Error::Config("train.folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Training settings with the top-level model and seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            model: self.model,
            seed: self.seed,
            ..self.train.clone()
        }
    }
}
