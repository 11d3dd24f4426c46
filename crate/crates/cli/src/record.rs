//! Run records: every artifact a pipeline run emits, content-hashed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Filename within the output directory.
    pub name: String,
    pub sha256: String,
}

/// The reproducibility contract: identical config and inputs reproduce an
/// identical artifact hash list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// "ok" or "failed:<stage>".
    pub status: String,
    /// Verbatim config file contents.
    pub config_echo: String,
    pub parameters: BTreeMap<String, String>,
    /// Selected cluster count per space.
    pub selected_k: BTreeMap<String, usize>,
    /// Every file the run created, in emission order.
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunRecord {
    pub fn artifact_hashes(&self) -> BTreeMap<&str, &str> {
        self.artifacts
            .iter()
            .map(|a| (a.name.as_str(), a.sha256.as_str()))
            .collect()
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String, CliError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}
