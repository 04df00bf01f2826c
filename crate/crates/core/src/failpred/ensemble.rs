use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{stratified_folds, stratified_split, LabeledDataset};
use super::metrics::{coefficient_of_variation, metrics_at, optimize_threshold, GridPoint, Metrics};
use super::models::{train_base, BaseClassifierConfig, Classifier, Family};
use super::rebalance::{cohort_specs, rebalance, Objective, RebalanceSpec};
use crate::error::{Error, Result};
use crate::imgfeat::{fit_standardizer, FeatureVector, Standardizer};
use crate::rng::keyed_u64;

pub const MODEL_FORMAT: &str = "lineup-failure-ensemble";
pub const MODEL_VERSION: u32 = 1;
pub const MODELS_PER_COHORT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub seed: u64,
    pub models_per_cohort: usize,
    /// Skips threshold search and uses this value.
    pub threshold_override: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            seed: 0,
            models_per_cohort: MODELS_PER_COHORT,
            threshold_override: None,
        }
    }
}

impl EnsembleConfig {
    /// Ten evenly spaced precision ratios followed by ten recall ratios.
    pub fn specs(&self) -> Vec<RebalanceSpec> {
        let mut specs = cohort_specs(Objective::Precision, self.models_per_cohort, self.seed);
        specs.extend(cohort_specs(Objective::Recall, self.models_per_cohort, self.seed));
        specs
    }
}

/// One trained base model with the data recipe and hyperparameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub spec: RebalanceSpec,
    pub config: BaseClassifierConfig,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub version: u32,
    pub feature_dim: usize,
    pub standardizer: Standardizer,
    pub precision_models: Vec<CohortMember>,
    pub recall_models: Vec<CohortMember>,
    pub threshold: f64,
}

fn cohort_mean(models: &[CohortMember], z: &[f64]) -> f64 {
    models.iter().map(|m| m.classifier.predict_proba(z)).sum::<f64>() / models.len() as f64
}

/// √(a·b), the aggregation of the two cohort means.
pub fn geometric_mean(a: f64, b: f64) -> f64 {
    (a * b).sqrt()
}

impl EnsembleModel {
    /// Assembles a model from already trained members; used by stub harnesses.
    pub fn from_members(
        standardizer: Standardizer,
        precision_models: Vec<CohortMember>,
        recall_models: Vec<CohortMember>,
        threshold: f64,
    ) -> Result<Self> {
        if precision_models.is_empty() || recall_models.is_empty() {
            return Err(Error::Empty("ensemble cohort".into()));
        }
        Ok(EnsembleModel {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            feature_dim: standardizer.dim(),
            standardizer,
            precision_models,
            recall_models,
            threshold,
        })
    }

    /// Mean failure probabilities of the precision and recall cohorts.
    pub fn cohort_probabilities(&self, values: &[f64]) -> Result<(f64, f64)> {
        let z = self.standardizer.apply(values)?;
        Ok((
            cohort_mean(&self.precision_models, &z),
            cohort_mean(&self.recall_models, &z),
        ))
    }

    /// Ensemble failure probability of a raw (unstandardized) feature vector.
    pub fn predict_proba(&self, v: &FeatureVector) -> Result<f64> {
        let (p, r) = self.cohort_probabilities(&v.values)?;
        Ok(geometric_mean(p, r))
    }

    /// Predicted failure: probability at or above the threshold.
    pub fn classify(&self, v: &FeatureVector) -> Result<bool> {
        Ok(self.predict_proba(v)? >= self.threshold)
    }

    pub fn predict_many(&self, vectors: &[FeatureVector]) -> Result<Vec<f64>> {
        vectors.par_iter().map(|v| self.predict_proba(v)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: EnsembleModel = serde_json::from_str(&text)?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(Error::malformed(
                path,
                1,
                format!("unsupported model {} v{}", model.format, model.version),
            ));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberReport {
    pub objective: Objective,
    pub family: Family,
    pub ratio: f64,
    pub train_samples: usize,
    pub train_failures: usize,
    /// Validation metrics of the single model at probability 0.5.
    pub val: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub train_samples: usize,
    pub val_samples: usize,
    pub members: Vec<MemberReport>,
    pub threshold: f64,
    pub threshold_grid: Vec<GridPoint>,
    pub val: Metrics,
}

fn standardize(data: &LabeledDataset, s: &Standardizer) -> Result<LabeledDataset> {
    let vectors = data
        .vectors
        .iter()
        .map(|v| {
            Ok(FeatureVector {
                image_id: v.image_id.clone(),
                values: s.apply(&v.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledDataset {
        vectors,
        labels: data.labels.clone(),
        split: data.split,
    })
}

/// Trains both cohorts (in parallel, each model with its own seed) and picks
/// the threshold on `val`.
pub fn train_ensemble(
    train: &LabeledDataset,
    val: &LabeledDataset,
    config: &EnsembleConfig,
) -> Result<(EnsembleModel, TrainingReport)> {
    train_ensemble_with_specs(train, val, &config.specs(), config)
}

pub fn train_ensemble_with_specs(
    train: &LabeledDataset,
    val: &LabeledDataset,
    specs: &[RebalanceSpec],
    config: &EnsembleConfig,
) -> Result<(EnsembleModel, TrainingReport)> {
    if train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if train.failures() == 0 || train.successes() == 0 {
        return Err(Error::SingleClass);
    }
    let standardizer = fit_standardizer(&train.rows())?;
    let train_z = standardize(train, &standardizer)?;
    let val_z = standardize(val, &standardizer)?;

    let mut cohort_position = [0usize; 2];
    let jobs: Vec<(RebalanceSpec, BaseClassifierConfig)> = specs
        .iter()
        .map(|spec| {
            let slot = &mut cohort_position[(spec.objective == Objective::Recall) as usize];
            let family = Family::cohort_rotation(spec.objective)[*slot % 4];
            let key = match spec.objective {
                Objective::Precision => "precision-model",
                Objective::Recall => "recall-model",
            };
            let seed = keyed_u64(config.seed, key, *slot as u64);
            *slot += 1;
            (*spec, BaseClassifierConfig::for_cohort(family, spec.objective, seed))
        })
        .collect();

    let trained: Vec<(CohortMember, MemberReport)> = jobs
        .par_iter()
        .map(|(spec, cfg)| {
            let data = rebalance(&train_z, spec)?;
            let classifier = train_base(cfg, &data)?;
            let probs: Vec<f64> = val_z
                .vectors
                .iter()
                .map(|v| classifier.predict_proba(&v.values))
                .collect();
            let report = MemberReport {
                objective: spec.objective,
                family: cfg.family,
                ratio: spec.ratio,
                train_samples: data.len(),
                train_failures: data.failures(),
                val: metrics_at(&probs, &val_z.labels, 0.5),
            };
            Ok((
                CohortMember {
                    spec: *spec,
                    config: *cfg,
                    classifier,
                },
                report,
            ))
        })
        .collect::<Result<_>>()?;

    let mut precision_models = Vec::new();
    let mut recall_models = Vec::new();
    let mut members = Vec::new();
    for (m, r) in trained {
        members.push(r);
        match m.spec.objective {
            Objective::Precision => precision_models.push(m),
            Objective::Recall => recall_models.push(m),
        }
    }
    let mut model = EnsembleModel::from_members(standardizer, precision_models, recall_models, 0.5)?;
    let val_probs = model.predict_many(&val.vectors)?;
    let search = optimize_threshold(&val_probs, &val.labels)?;
    model.threshold = config.threshold_override.unwrap_or(search.threshold);
    let report = TrainingReport {
        train_samples: train.len(),
        val_samples: val.len(),
        members,
        threshold: model.threshold,
        threshold_grid: search.grid,
        val: metrics_at(&val_probs, &val.labels, model.threshold),
    };
    Ok((model, report))
}

/// Test-set metrics at the model's threshold.
pub fn evaluate_classifier(model: &EnsembleModel, test: &LabeledDataset) -> Result<Metrics> {
    let probs = model.predict_many(&test.vectors)?;
    Ok(metrics_at(&probs, &test.labels, model.threshold))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub threshold: f64,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub folds: Vec<FoldResult>,
    pub precision_cov: f64,
    pub recall_cov: f64,
}

/// Validation share carved out of each training fold for threshold search.
const INNER_VAL_FRACTION: f64 = 0.1;

/// Stratified k-fold stability check. Each fold's complement is split 90/10
/// (stratified) into training and threshold-validation data.
pub fn cross_validate(data: &LabeledDataset, config: &EnsembleConfig, folds: usize) -> Result<StabilityReport> {
    let assignment = stratified_folds(&data.labels, folds, config.seed)?;
    let results = assignment
        .iter()
        .enumerate()
        .map(|(k, held_out)| {
            let mut in_fold = vec![false; data.len()];
            held_out.iter().for_each(|&i| in_fold[i] = true);
            let rest: Vec<usize> = (0..data.len()).filter(|&i| !in_fold[i]).collect();
            let fold_seed = keyed_u64(config.seed, "cv-fold", k as u64);
            let (train, val, _) = stratified_split(
                &data.subset(&rest, None),
                [1.0 - INNER_VAL_FRACTION, INNER_VAL_FRACTION, 0.0],
                fold_seed,
            )?;
            let fold_config = EnsembleConfig {
                seed: fold_seed,
                ..*config
            };
            let (model, _) = train_ensemble(&train, &val, &fold_config)?;
            Ok(FoldResult {
                fold: k,
                threshold: model.threshold,
                metrics: evaluate_classifier(&model, &data.subset(held_out, None))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let precision: Vec<f64> = results.iter().map(|r| r.metrics.precision).collect();
    let recall: Vec<f64> = results.iter().map(|r| r.metrics.recall).collect();
    Ok(StabilityReport {
        precision_cov: coefficient_of_variation(&precision),
        recall_cov: coefficient_of_variation(&recall),
        folds: results,
    })
}
