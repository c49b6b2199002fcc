//! Versioned JSON model bundles.

use std::fs;
use std::path::{Path, PathBuf};

use cdss_core::aggregation::{predict_patient, AggregationError, PredictionResult, Scheme, TrainedModel};
use cdss_core::dataset::{Dataset, FeatureSummary, Schema};
use cdss_core::pipeline::{PipelineConfig, TrainingOutput};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("cannot read bundle {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed bundle at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("bundle format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u64 },
    #[error("inconsistent bundle: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMetadata {
    /// Seconds since the Unix epoch, taken from `SOURCE_DATE_EPOCH`.
    pub created_at: Option<u64>,
    pub seed: u64,
    pub config_snapshot: PipelineConfig,
    pub dataset_fingerprint: String,
    pub n_training_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub schema: Schema,
    pub feature_summary: Vec<FeatureSummary>,
    pub model: TrainedModel,
    pub metadata: BundleMetadata,
}

fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.trim().parse().ok())
}

impl ModelBundle {
    pub fn new(schema: Schema, dataset: &Dataset, training: TrainingOutput, config: &PipelineConfig) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            schema,
            feature_summary: dataset.feature_summary(),
            model: training.model,
            metadata: BundleMetadata {
                created_at: source_date_epoch(),
                seed: config.seed(),
                config_snapshot: config.clone(),
                dataset_fingerprint: dataset.fingerprint(),
                n_training_samples: dataset.n_samples(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), BundleError> {
        let m = &self.model;
        let names = self.schema.feature_names();
        if names != m.feature_names {
            return Err(BundleError::Invalid("schema features differ from model features".into()));
        }
        if m.correctness_models.len() != m.decision_set.len() {
            return Err(BundleError::Invalid(format!(
                "{} correctness models for {} rules",
                m.correctness_models.len(),
                m.decision_set.len()
            )));
        }
        if m.decision_set.is_empty() {
            return Err(BundleError::Invalid("decision set is empty".into()));
        }
        if m.scaler.n_features() != names.len() || self.feature_summary.len() != names.len() {
            return Err(BundleError::Invalid("scaler or feature summary width differs from schema".into()));
        }
        for (i, rule) in m.decision_set.rules().iter().enumerate() {
            rule.validate(names.len(), usize::MAX).map_err(|e| BundleError::Invalid(format!("rule {i}: {e}")))?;
        }
        for (i, cm) in m.correctness_models.iter().enumerate() {
            if cm.rule_index != i {
                return Err(BundleError::Invalid(format!("correctness model {i} refers to rule {}", cm.rule_index)));
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> &[String] {
        &self.model.feature_names
    }

    pub fn predict(&self, instance: &[f64], scheme: Scheme) -> Result<PredictionResult, AggregationError> {
        predict_patient(&self.model, instance, scheme)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BundleError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BundleError::Parse { path: "$".into(), message: e.to_string() })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(found) => return Err(BundleError::Version { found }),
            None => {
                return Err(BundleError::Parse {
                    path: "format_version".into(),
                    message: "missing or not an integer".into(),
                })
            }
        }
        let mut de = serde_json::Deserializer::from_str(text);
        let bundle: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| BundleError::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn load(path: &Path) -> Result<Self, BundleError> {
        let text = fs::read_to_string(path).map_err(|source| BundleError::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Writes through a temporary file and a rename, so readers never see a
    /// partial bundle.
    pub fn save(&self, path: &Path) -> Result<(), BundleError> {
        let io = |source| BundleError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json()).map_err(io)?;
        fs::rename(&tmp, path).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            io(e)
        })
    }

    /// SHA-256 of the canonical serialization.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
