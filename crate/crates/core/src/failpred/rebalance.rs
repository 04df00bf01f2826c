use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::LabeledDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Precision,
    Recall,
}

impl Objective {
    /// Admissible success:failure ratios for the cohort.
    pub fn ratio_range(self) -> (f64, f64) {
        match self {
            Objective::Precision => (1.2, 2.0),
            Objective::Recall => (0.7, 1.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebalanceSpec {
    /// Successes kept per failure.
    pub ratio: f64,
    pub seed: u64,
    pub objective: Objective,
}

impl RebalanceSpec {
    pub fn new(ratio: f64, seed: u64, objective: Objective) -> Result<Self> {
        let (lo, hi) = objective.ratio_range();
        // small slack for evenly spaced grids computed in floating point
        if !(lo - 1e-9..=hi + 1e-9).contains(&ratio) {
            return Err(Error::InvalidArgument(format!(
                "ratio {ratio} outside [{lo}, {hi}] for {objective:?} cohort"
            )));
        }
        Ok(RebalanceSpec { ratio, seed, objective })
    }
}

/// `count` evenly spaced ratios spanning the objective's range, endpoints included.
pub fn cohort_specs(objective: Objective, count: usize, base_seed: u64) -> Vec<RebalanceSpec> {
    let (lo, hi) = objective.ratio_range();
    let salt = match objective {
        Objective::Precision => 0,
        Objective::Recall => 1000,
    };
    (0..count)
        .map(|i| {
            let ratio = if count == 1 {
                lo
            } else {
                lo + (hi - lo) * i as f64 / (count - 1) as f64
            };
            RebalanceSpec {
                ratio,
                seed: base_seed.wrapping_add(salt + i as u64),
                objective,
            }
        })
        .collect()
}

/// Number of successes kept for a given failure count.
pub fn majority_target(failures: usize, ratio: f64) -> usize {
    (ratio * failures as f64).round() as usize
}

/// Keeps every failure and a seeded sample (without replacement) of
/// round(ratio × failures) successes. Original order is preserved.
pub fn rebalance(train: &LabeledDataset, spec: &RebalanceSpec) -> Result<LabeledDataset> {
    if !(spec.ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("ratio {} must be positive", spec.ratio)));
    }
    let failures = train.class_indices(true);
    let successes = train.class_indices(false);
    let wanted = majority_target(failures.len(), spec.ratio);
    if wanted > successes.len() {
        return Err(Error::InsufficientMajority {
            requested: wanted,
            available: successes.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut keep: Vec<usize> = index::sample(&mut rng, successes.len(), wanted)
        .into_iter()
        .map(|j| successes[j])
        .chain(failures)
        .collect();
    keep.sort_unstable();
    Ok(train.subset(&keep, train.split))
}
