//! Pipeline configuration, loaded from TOML with defaults for every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::article::GenerationConfig;
use crate::digest::json_digest;
use crate::distill::DistillConfig;
use crate::gateway::BackendConfig;
use crate::ingest::IngestRules;
use crate::metrics::QualityPolicy;
use crate::revision::{RevisionPolicy, MAX_ITERATIONS_CAP};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RevisionSettings {
    pub max_iterations: u32,
    pub temperature: f64,
}

impl Default for RevisionSettings {
    fn default() -> Self {
        let p = RevisionPolicy::default();
        Self {
            max_iterations: p.max_iterations,
            temperature: p.temperature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSettings {
    pub dir: PathBuf,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ingest: IngestRules,
    pub backend: BackendConfig,
    pub distill: DistillConfig,
    pub generation: GenerationConfig,
    pub quality: QualityPolicy,
    pub revision: RevisionSettings,
    pub output: OutputSettings,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Digest of the effective settings. The output directory is left out
    /// so that moving the outputs does not change it.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSettings::default();
        json_digest(&c)
    }

    pub fn revision_policy(&self) -> RevisionPolicy {
        RevisionPolicy {
            max_iterations: self.revision.max_iterations,
            temperature: self.revision.temperature,
            quality: self.quality.clone(),
        }
    }

    /// Checks everything that can be checked without touching the
    /// filesystem or the network.
    // Negated comparisons so that NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ingest
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.generation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = &self.distill;
        for (name, v) in [
            ("distill.augmentation_threshold", d.augmentation_threshold),
            ("distill.pass_threshold", d.pass_threshold),
            ("distill.verbatim_limit", d.verbatim_limit),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::Invalid(format!("{name} must be in [0, 1]")));
            }
        }
        if !(d.temperature >= 0.0) || !(self.revision.temperature >= 0.0) {
            return Err(ConfigError::Invalid("temperatures must be >= 0".into()));
        }
        if self.revision.max_iterations > MAX_ITERATIONS_CAP {
            return Err(ConfigError::Invalid(format!(
                "revision.max_iterations must be <= {MAX_ITERATIONS_CAP}"
            )));
        }
        let w = &self.quality.weights;
        if [w.readability, w.cohesion, w.structure].iter().any(|x| !(*x >= 0.0))
            || w.readability + w.cohesion + w.structure <= 0.0
        {
            return Err(ConfigError::Invalid(
                "quality weights must be non-negative with a positive sum".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn partial_tables_and_round_trip() {
        let c = PipelineConfig::from_toml(
            "[backend]\nmax_retries = 1\n[revision]\nmax_iterations = 0\n[quality.thresholds]\ncohesion = 0.3\n",
        )
        .unwrap();
        assert_eq!(c.backend.max_retries, 1);
        assert_eq!(c.backend.max_in_flight, 4);
        assert_eq!(c.revision.max_iterations, 0);
        assert_eq!(c.quality.thresholds.cohesion, 0.3);
        assert_eq!(c.revision_policy().quality.thresholds.cohesion, 0.3);
        let back = PipelineConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
    }

    #[test]
    fn rejects_unknown_tables_and_bad_values() {
        assert!(PipelineConfig::from_toml("[nope]\nx = 1\n").is_err());
        let c = PipelineConfig::from_toml("[revision]\nmax_iterations = 50\n").unwrap();
        assert!(c.validate().is_err());
        let c = PipelineConfig::from_toml("[backend]\nkind = \"http\"\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_ignores_output_dir() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.digest(), b.digest());
    }
}
