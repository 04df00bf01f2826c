use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PipelineError;
use crate::corpus::CurationConfig;
use crate::failpred::DEFAULT_SPLIT;
use crate::simindex::DEFAULT_BATCH_SIZE;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Original embeddings (JSONL or binary container).
    pub embeddings: Option<PathBuf>,
    /// Embeddings of restored images, keyed by the original image ids.
    pub restored_embeddings: Option<PathBuf>,
    /// Embeddings concatenated into feature vectors; defaults to `embeddings`.
    pub feature_embeddings: Option<PathBuf>,
    /// Directory holding `<image_id>.pgm`.
    pub images: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    /// Labeled feature table; computed from the corpus when unset.
    pub features: Option<PathBuf>,
    /// Failure-prediction model artifact.
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineupSettings {
    pub seed: u64,
    pub batch_size: usize,
    pub distinct_filler_identities: bool,
}

impl Default for LineupSettings {
    fn default() -> Self {
        LineupSettings {
            seed: 0,
            batch_size: DEFAULT_BATCH_SIZE,
            distinct_filler_identities: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub seed: u64,
    pub models_per_cohort: usize,
    /// Train/validation/test fractions.
    pub split: [f64; 3],
    pub threshold_override: Option<f64>,
    /// Stratified folds for the stability check; 0 disables it.
    pub folds: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        TrainingSettings {
            seed: 0,
            models_per_cohort: 10,
            split: DEFAULT_SPLIT,
            threshold_override: None,
            folds: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    /// Compute lineup features from the probe instead of the source image.
    pub from_probe: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestorationSettings {
    /// Shell command with `{input}` and `{output}` placeholders.
    pub command: Option<String>,
    pub timeout_secs: f64,
    /// Exit with the hook-failure code when more than this fraction of hook
    /// invocations fail.
    pub max_failure_fraction: f64,
}

impl Default for RestorationSettings {
    fn default() -> Self {
        RestorationSettings {
            command: None,
            timeout_secs: 60.0,
            max_failure_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    /// Expected embedding dimension; inferred from the first record when unset.
    pub embedding_dim: Option<usize>,
    pub lineup: LineupSettings,
    pub curation: CurationConfig,
    pub training: TrainingSettings,
    pub features: FeatureSettings,
    pub restoration: RestorationSettings,
    /// Worker threads; all cores when unset.
    pub parallelism: Option<usize>,
}

/// Sets `root[a][b]... = value` for a dotted key. The value is parsed as JSON
/// when possible and kept as a string otherwise.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<(), PipelineError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(PipelineError::Usage(format!("bad override key {key:?}")));
    }
    for part in &parts[..parts.len() - 1] {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| PipelineError::Usage(format!("override {key}: {part} is not a section")))?;
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| PipelineError::Usage(format!("override {key}: parent is not a section")))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl PipelineConfig {
    /// Reads an optional JSON config and applies dotted overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let mut root = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| PipelineError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| PipelineError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => serde_json::to_value(PipelineConfig::default()).expect("default config serializes"),
        };
        for (k, v) in overrides {
            apply_override(&mut root, k, v)?;
        }
        let cfg: PipelineConfig =
            serde_json::from_value(root).map_err(|e| PipelineError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.lineup.batch_size == 0 {
            return Err(PipelineError::Usage("lineup.batch_size must be at least 1".into()));
        }
        if self.parallelism == Some(0) {
            return Err(PipelineError::Usage("parallelism must be at least 1".into()));
        }
        if let Some(cmd) = &self.restoration.command {
            if !cmd.contains("{input}") || !cmd.contains("{output}") {
                return Err(PipelineError::Usage(
                    "restoration.command needs {input} and {output} placeholders".into(),
                ));
            }
        }
        if !(self.restoration.timeout_secs > 0.0) {
            return Err(PipelineError::Usage("restoration.timeout_secs must be positive".into()));
        }
        for (name, path) in [
            ("paths.embeddings", &self.paths.embeddings),
            ("paths.restored_embeddings", &self.paths.restored_embeddings),
            ("paths.feature_embeddings", &self.paths.feature_embeddings),
            ("paths.images", &self.paths.images),
            ("paths.landmarks", &self.paths.landmarks),
            ("paths.features", &self.paths.features),
            ("paths.model", &self.paths.model),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(PipelineError::Usage(format!("{name}: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// A configured path, or a usage error naming the missing key.
    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, PipelineError> {
        path.as_deref()
            .ok_or_else(|| PipelineError::Usage(format!("{key} is required for this command")))
    }

    pub fn output_dir(&self) -> Result<&Path, PipelineError> {
        self.require(&self.paths.output, "output directory (--output)")
    }
}
