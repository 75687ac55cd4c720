//! One TOML file drives the whole pipeline: corpus shape, model shape,
//! both training stages, and the ablation seeds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::model::ModelConfig;
use crate::synthgen::CorpusConfig;
use crate::train::{PretrainConfig, RecTrainConfig};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub corpus: CorpusConfig,
    pub model: ModelConfig,
    pub pretrain: PretrainConfig,
    pub recommender: RecTrainConfig,
    pub ablation_seeds: Vec<u64>,
}

impl PipelineConfig {
    /// Everything sized to finish on one core in minutes.
    pub fn desk() -> Self {
        PipelineConfig {
            corpus: CorpusConfig::desk(),
            model: ModelConfig::desk(),
            pretrain: PretrainConfig::desk(),
            recommender: RecTrainConfig::desk(),
            ablation_seeds: vec![1, 2, 3],
        }
    }

    /// Full-scale settings. Keep this for reference; it does not fit on
    /// a single core.
    pub fn paper() -> Self {
        PipelineConfig {
            corpus: CorpusConfig::production(),
            model: ModelConfig::production(),
            pretrain: PretrainConfig::paper(),
            recommender: RecTrainConfig::paper(),
            ablation_seeds: vec![1, 2, 3],
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: PipelineConfig =
            toml::from_str(&text).map_err(|e| CliError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self).map_err(|e| CliError::Toml(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)
    }

    /// Per-section checks plus the cross-section agreements the training
    /// code assumes but cannot see from one side alone.
    pub fn validate(&self) -> Result<(), CliError> {
        self.corpus.validate()?;
        self.model.validate()?;
        if self.model.frame_height != self.corpus.height
            || self.model.frame_width != self.corpus.width
        {
            return Err(CliError::Usage(format!(
                "model expects {}x{} frames but the corpus renders {}x{}",
                self.model.frame_height,
                self.model.frame_width,
                self.corpus.height,
                self.corpus.width
            )));
        }
        if self.model.audio_sample_rate != self.corpus.sample_rate {
            return Err(CliError::Usage(format!(
                "model expects {} Hz audio but the corpus renders {} Hz",
                self.model.audio_sample_rate, self.corpus.sample_rate
            )));
        }
        if self.ablation_seeds.is_empty() {
            return Err(CliError::Usage("ablation_seeds must be non-empty".into()));
        }
        Ok(())
    }
}
