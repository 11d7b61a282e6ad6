use std::path::{Path, PathBuf};

use faultlm::llm_client::{InferenceConfig, RetryPolicy};
use faultlm::{Scheme, Track};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Everything a run depends on. Loaded from a TOML file (all keys optional),
/// then overridden by command-line flags. Paths are relative to the work
/// directory. The API key is never part of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Directory of ingested recordings; `None` builds from synthetic signals.
    pub data_root: Option<PathBuf>,
    pub track: Track,
    pub scheme: Scheme,
    pub segment_len: usize,
    pub decimals: u32,
    pub segments_per_group: usize,
    pub seed: u64,
    pub equip_info: bool,
    pub synth: SynthSettings,
    pub split: SplitSettings,
    pub inference: InferenceSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub noise_sigma: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    /// task1-de, task1-fe, task2 or task3.
    pub plan: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InferenceSettings {
    pub endpoint_url: Option<String>,
    pub model_name: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub max_concurrency: usize,
    pub timeout_s: f64,
    pub retry: RetryPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_root: None,
            track: Track::Fft,
            scheme: Scheme::Four,
            segment_len: faultlm::preprocess::DEFAULT_SEGMENT_LEN,
            decimals: faultlm::preprocess::DEFAULT_DECIMALS,
            segments_per_group: faultlm::promptgen::DEFAULT_SEGMENTS_PER_GROUP,
            seed: 0,
            equip_info: true,
            synth: SynthSettings::default(),
            split: SplitSettings::default(),
            inference: InferenceSettings::default(),
        }
    }
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self {
            noise_sigma: 0.1,
            duration_s: 10.0,
        }
    }
}

impl Default for SplitSettings {
    fn default() -> Self {
        Self {
            plan: "task2".into(),
            seed: 0,
        }
    }
}

impl Default for InferenceSettings {
    fn default() -> Self {
        let d = InferenceConfig::new("", "");
        Self {
            endpoint_url: None,
            model_name: None,
            temperature: d.temperature,
            max_tokens: d.max_tokens,
            max_concurrency: d.max_concurrency,
            timeout_s: d.timeout_s,
            retry: d.retry,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Hex SHA-256 of the canonical JSON rendering.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Inference settings as a client config; the key comes from the
    /// environment only.
    pub fn inference_config(&self) -> Result<InferenceConfig, CliError> {
        let inf = &self.inference;
        let url = inf
            .endpoint_url
            .clone()
            .ok_or_else(|| CliError::Config("no endpoint given (--endpoint or inference.endpoint_url)".into()))?;
        let model = inf
            .model_name
            .clone()
            .ok_or_else(|| CliError::Config("no model given (--model or inference.model_name)".into()))?;
        let mut cfg = InferenceConfig::new(url, model).with_env_key();
        cfg.temperature = inf.temperature;
        cfg.max_tokens = inf.max_tokens;
        cfg.max_concurrency = inf.max_concurrency;
        cfg.timeout_s = inf.timeout_s;
        cfg.retry = inf.retry.clone();
        Ok(cfg)
    }
}
