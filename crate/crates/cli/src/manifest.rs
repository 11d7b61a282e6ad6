use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::CliError;

pub const RUN_MANIFEST: &str = "run-manifest.json";

/// Provenance of one artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub command: String,
    pub config_hash: String,
    pub config: PipelineConfig,
    pub cli_version: String,
    pub core_version: String,
    pub created_unix_s: u64,
    /// Command-specific inputs (corpora, manifests, flags not in the config).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, String>,
}

/// `run-manifest.json` of one output directory, keyed by artifact file name.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

/// Records `artifacts` (paths inside one directory) in that directory's run
/// manifest, keeping entries of other artifacts.
pub fn record(
    dir: &Path,
    artifacts: &[&Path],
    command: &str,
    cfg: &PipelineConfig,
    inputs: BTreeMap<String, String>,
) -> Result<(), CliError> {
    let path = dir.join(RUN_MANIFEST);
    let mut manifest: RunManifest = match std::fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => RunManifest::default(),
    };
    let created_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let entry = ArtifactEntry {
        command: command.into(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        cli_version: env!("CARGO_PKG_VERSION").into(),
        core_version: faultlm::VERSION.into(),
        created_unix_s,
        inputs,
    };
    for a in artifacts {
        let name = a
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        manifest.artifacts.insert(name, entry.clone());
    }
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
}
