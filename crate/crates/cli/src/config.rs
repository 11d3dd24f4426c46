//! Declarative run configuration (TOML), echoed verbatim into the run
//! record.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use repdiv::clustering::Metric;
use repdiv::distill::CentersMode;
use repdiv::vectorstore::Space;

use crate::CliError;

/// Full-pipeline configuration. Defaults: k_min=2, k_max=20, five seeds,
/// cosine metric, encoder-space distillation with medoid centers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Embedding-space vector snapshot (jsonl or binary, sniffed).
    pub embedding: PathBuf,
    /// Encoder-space vector snapshot.
    pub encoder: PathBuf,
    /// Corpus JSONL with `{"id", "sources", "reference"}` lines.
    pub corpus: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_metric")]
    pub metric: Metric,
    pub k_neighbors: usize,
    pub budget: usize,
    #[serde(default = "default_space")]
    pub distill_space: Space,
    #[serde(default = "default_centers")]
    pub centers: CentersMode,
    /// Seed for clustering/distill/random-baseline; defaults to the first
    /// sweep seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_k_min() -> usize {
    2
}

fn default_k_max() -> usize {
    20
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3, 4, 5]
}

fn default_metric() -> Metric {
    Metric::Cosine
}

fn default_space() -> Space {
    Space::Encoder
}

fn default_centers() -> CentersMode {
    CentersMode::Medoid
}

impl RunConfig {
    pub fn selection_seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| self.seeds[0])
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.k_min < 2 {
            return Err(CliError::Config(format!("k_min must be >= 2, got {}", self.k_min)));
        }
        if self.k_min >= self.k_max {
            return Err(CliError::Config(format!(
                "need k_min < k_max, got {} >= {}",
                self.k_min, self.k_max
            )));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds must be non-empty".into()));
        }
        if self.budget == 0 {
            return Err(CliError::Config("budget must be >= 1".into()));
        }
        if self.k_neighbors == 0 {
            return Err(CliError::Config("k_neighbors must be >= 1".into()));
        }
        Ok(())
    }
}

/// Loads, parses and validates a config file, returning it together with
/// the verbatim file contents for the run record.
pub fn load_config(path: impl AsRef<Path>) -> Result<(RunConfig, String), CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let config: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok((config, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
embedding = "emb.jsonl"
encoder = "enc.jsonl"
corpus = "corpus.jsonl"
out_dir = "out"
k_neighbors = 29
budget = 9
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.validate().unwrap();
        assert_eq!(config.k_min, 2);
        assert_eq!(config.k_max, 20);
        assert_eq!(config.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(config.metric, Metric::Cosine);
        assert_eq!(config.distill_space, Space::Encoder);
        assert_eq!(config.centers, CentersMode::Medoid);
        assert_eq!(config.selection_seed(), 1);
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.k_min = 1;
        assert!(config.validate().is_err());

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.budget = 0;
        assert!(config.validate().is_err());

        let mut config: RunConfig = toml::from_str(MINIMAL).unwrap();
        config.seeds.clear();
        assert!(config.validate().is_err());
    }

    #[test]
    fn load_config_round_trips_echo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let (config, echo) = load_config(&path).unwrap();
        assert_eq!(echo, MINIMAL);
        assert_eq!(config.budget, 9);
    }
}
